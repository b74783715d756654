#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cif/model.hpp"
#include "cif/training.hpp"

// Checkpoint container:
//
//   CIF-CHECKPOINT
//   format_version 1
//   <key> <values...>            architecture, permutations, training state
//   blocks <count>
//   end_header
//   <count> × { u32 name_len, name, u32 rank, u64 dims[rank], raw LE scalars }
//
// Header values are written deterministically, so save → load → save is
// byte-identical.
namespace cif {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

template <typename T>
struct Checkpoint {
  CifModel<T> model;
  std::optional<TrainingState<T>> training;
};

template <typename T>
std::string serialize_checkpoint(const CifModel<T>& model, const TrainingState<T>* training = nullptr);
template <typename T>
Checkpoint<T> deserialize_checkpoint(const std::string& bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CifModel<T>& model,
                     const TrainingState<T>* training = nullptr);
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

/// Scalar precision recorded in a checkpoint header.
Precision checkpoint_precision(const std::filesystem::path& path);

}  // namespace cif
