#include "cif/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace cif {

namespace {

constexpr const char* kMagic = "CIF-CHECKPOINT";

template <typename T>
constexpr Precision precision_of() {
  return sizeof(T) == 4 ? Precision::F32 : Precision::F64;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out = std::to_string(v.size());
  for (auto x : v) out += " " + std::to_string(x);
  return out;
}

template <typename T>
void write_permutations(std::ostringstream& os, const char* name, const FlowStack<T>& flow) {
  const auto& layers = flow.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (const auto* p = std::get_if<PermutationLayer>(&layers[k])) {
      os << "permutation " << name << ' ' << k << ' ' << join(p->permutation()) << '\n';
    }
  }
}

template <typename POD>
void put(std::string& out, POD v) {
  char buf[sizeof(POD)];
  std::memcpy(buf, &v, sizeof(POD));
  out.append(buf, sizeof(POD));
}

template <typename T>
void put_block(std::string& out, const std::string& name, const Shape& shape, std::span<const T> values) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::uint64_t>(out, d);
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
}

struct Block {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  template <typename POD>
  POD get(const char* what) {
    need(sizeof(POD), what);
    POD v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(POD));
    pos_ += sizeof(POD);
    return v;
  }

  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }

  const std::string& bytes_;
  std::size_t pos_;
};

Block read_block(Reader& r, Precision precision) {
  Block b;
  const auto name_len = r.get<std::uint32_t>("block name length");
  if (name_len > 4096) throw CheckpointError("checkpoint block name too long");
  b.name = r.get_string(name_len, "block name");
  const auto rank = r.get<std::uint32_t>("block rank");
  if (rank > 8) throw CheckpointError("checkpoint block '" + b.name + "' has implausible rank");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = r.get<std::uint64_t>("block shape");
    if (d > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint block '" + b.name + "' has implausible shape");
    b.shape.push_back(static_cast<std::size_t>(d));
    count *= static_cast<std::size_t>(d);
  }
  b.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    b.values[i] = precision == Precision::F32 ? static_cast<double>(r.get<float>("block values"))
                                              : r.get<double>("block values");
  }
  return b;
}

struct Header {
  std::map<std::string, std::string> values;
  std::vector<std::string> permutations;

  const std::string& at(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw CheckpointError("checkpoint header is missing '" + key + "'");
    return it->second;
  }
  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::size_t size_value(const std::string& key) const {
    const std::string& s = at(key);
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw CheckpointError("checkpoint header '" + key + "' is not an unsigned integer: " + s);
    }
  }

  double double_value(const std::string& key) const {
    const std::string& s = at(key);
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw CheckpointError("checkpoint header '" + key + "' is not a number: " + s);
    }
  }

  std::vector<std::size_t> list_value(const std::string& key) const {
    std::istringstream is(at(key));
    std::size_t n = 0;
    if (!(is >> n)) throw CheckpointError("checkpoint header '" + key + "' is malformed");
    std::vector<std::size_t> out(n);
    for (auto& v : out)
      if (!(is >> v)) throw CheckpointError("checkpoint header '" + key + "' is malformed");
    return out;
  }
};

std::pair<Header, std::size_t> parse_header(const std::string& bytes) {
  Header h;
  std::size_t pos = 0;
  bool first = true;
  while (true) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError("checkpoint header is truncated (no end_header)");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (first) {
      if (line != kMagic) throw CheckpointError("not a checkpoint file (bad magic)");
      first = false;
      continue;
    }
    if (line == "end_header") break;
    const auto sp = line.find(' ');
    std::string key = line.substr(0, sp);
    std::string value = sp == std::string::npos ? std::string() : line.substr(sp + 1);
    if (key == "permutation") {
      h.permutations.push_back(value);
    } else {
      h.values[key] = value;
    }
  }
  const auto version = h.size_value("format_version");
  if (version != static_cast<std::size_t>(kCheckpointFormatVersion)) {
    throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  }
  return {std::move(h), pos};
}

Precision header_precision(const Header& h, const std::string& key) {
  try {
    return parse_precision(h.at(key));
  } catch (const std::invalid_argument& err) {
    throw CheckpointError(std::string("checkpoint header: ") + err.what());
  }
}

ModelConfig parse_model_config(const Header& h) {
  ModelConfig c;
  c.embedding_dim = h.size_value("model.embedding_dim");
  c.point_segments = h.size_value("model.point_segments");
  c.point_blocks = h.size_value("model.point_blocks");
  c.prior_segments = h.size_value("model.prior_segments");
  c.prior_blocks = h.size_value("model.prior_blocks");
  c.hidden = h.size_value("model.hidden");
  c.residual_blocks = h.size_value("model.residual_blocks");
  c.scale_clamp = h.double_value("model.scale_clamp");
  c.encoder_point_widths = h.list_value("model.encoder_point_widths");
  c.encoder_head_widths = h.list_value("model.encoder_head_widths");
  c.seed = h.size_value("model.seed");
  c.zero_init = h.size_value("model.zero_init") != 0;
  return c;
}

TrainConfig parse_train_config(const Header& h) {
  TrainConfig c;
  c.lr0 = h.double_value("train.lr0");
  c.decay_factor = h.double_value("train.decay_factor");
  c.decay_every = h.size_value("train.decay_every");
  c.adam.beta1 = h.double_value("train.beta1");
  c.adam.beta2 = h.double_value("train.beta2");
  c.adam.eps = h.double_value("train.eps");
  c.epochs = h.size_value("train.epochs");
  c.clouds_per_batch = h.size_value("train.clouds_per_batch");
  c.points_f = h.size_value("train.points_f");
  c.points_h = h.size_value("train.points_h");
  c.seed = h.size_value("train.seed");
  c.precision = header_precision(h, "train.precision");
  c.max_grad_norm = h.double_value("train.max_grad_norm");
  return c;
}

template <typename T>
void apply_permutation(CifModel<T>& model, const std::string& line) {
  std::istringstream is(line);
  std::string flow;
  std::size_t layer = 0, n = 0;
  if (!(is >> flow >> layer >> n)) throw CheckpointError("malformed permutation entry: " + line);
  std::vector<std::size_t> perm(n);
  for (auto& v : perm)
    if (!(is >> v)) throw CheckpointError("malformed permutation entry: " + line);
  FlowStack<T>* stack = nullptr;
  if (flow == "prior") stack = &model.prior_flow();
  else if (flow == "point") stack = &model.point_flow();
  else throw CheckpointError("permutation entry names unknown flow '" + flow + "'");
  auto& layers = stack->layers();
  if (layer >= layers.size() || !std::holds_alternative<PermutationLayer>(layers[layer])) {
    throw CheckpointError("permutation entry for " + flow + " layer " + std::to_string(layer) +
                          " does not match the architecture");
  }
  if (n != stack->dim()) throw CheckpointError("permutation for " + flow + " layer " + std::to_string(layer) + " has wrong size");
  try {
    layers[layer] = PermutationLayer(std::move(perm));
  } catch (const std::invalid_argument& err) {
    throw CheckpointError(std::string("invalid permutation in checkpoint: ") + err.what());
  }
}

template <typename T>
void fill(Tensor<T>& tensor, const Block& block) {
  if (block.shape != tensor.shape()) {
    throw CheckpointError("checkpoint block '" + block.name + "' has shape " + shape_str(block.shape) + ", expected " +
                          shape_str(tensor.shape()));
  }
  auto d = tensor.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(block.values[i]);
}

}  // namespace

template <typename T>
std::string serialize_checkpoint(const CifModel<T>& model, const TrainingState<T>* training) {
  const ModelConfig& c = model.config();
  std::ostringstream os;
  os << kMagic << '\n';
  os << "format_version " << kCheckpointFormatVersion << '\n';
  os << "precision " << to_string(precision_of<T>()) << '\n';
  os << "model.embedding_dim " << c.embedding_dim << '\n';
  os << "model.point_segments " << c.point_segments << '\n';
  os << "model.point_blocks " << c.point_blocks << '\n';
  os << "model.prior_segments " << c.prior_segments << '\n';
  os << "model.prior_blocks " << c.prior_blocks << '\n';
  os << "model.hidden " << c.hidden << '\n';
  os << "model.residual_blocks " << c.residual_blocks << '\n';
  os << "model.scale_clamp " << fmt(c.scale_clamp) << '\n';
  os << "model.encoder_point_widths " << join(c.encoder_point_widths) << '\n';
  os << "model.encoder_head_widths " << join(c.encoder_head_widths) << '\n';
  os << "model.seed " << c.seed << '\n';
  os << "model.zero_init " << (c.zero_init ? 1 : 0) << '\n';
  write_permutations(os, "prior", model.prior_flow());
  write_permutations(os, "point", model.point_flow());

  const auto params = model.parameters();
  std::size_t blocks = params.size();
  const bool with_adam = training != nullptr && !training->adam.m.empty();
  if (with_adam) {
    if (training->adam.m.size() != params.size() || training->adam.v.size() != params.size()) {
      throw CheckpointError("optimizer state does not match the model parameters");
    }
    blocks += 2 * params.size();
  }
  if (training != nullptr) {
    const TrainConfig& t = training->config;
    os << "training 1\n";
    os << "train.lr0 " << fmt(t.lr0) << '\n';
    os << "train.decay_factor " << fmt(t.decay_factor) << '\n';
    os << "train.decay_every " << t.decay_every << '\n';
    os << "train.beta1 " << fmt(t.adam.beta1) << '\n';
    os << "train.beta2 " << fmt(t.adam.beta2) << '\n';
    os << "train.eps " << fmt(t.adam.eps) << '\n';
    os << "train.epochs " << t.epochs << '\n';
    os << "train.clouds_per_batch " << t.clouds_per_batch << '\n';
    os << "train.points_f " << t.points_f << '\n';
    os << "train.points_h " << t.points_h << '\n';
    os << "train.seed " << t.seed << '\n';
    os << "train.precision " << to_string(t.precision) << '\n';
    os << "train.max_grad_norm " << fmt(t.max_grad_norm) << '\n';
    os << "train.epoch " << training->epoch << '\n';
    os << "train.adam_step " << training->adam.step << '\n';
    os << "train.adam_state " << (with_adam ? 1 : 0) << '\n';
    os << "train.rng_state " << training->rng_state << '\n';
  }
  os << "blocks " << blocks << '\n';
  os << "end_header\n";

  std::string out = os.str();
  for (const auto& p : params) put_block<T>(out, p.name, p.tensor.shape(), p.tensor.data());
  if (with_adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_block<T>(out, "adam.m." + params[i].name, params[i].tensor.shape(), training->adam.m[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_block<T>(out, "adam.v." + params[i].name, params[i].tensor.shape(), training->adam.v[i]);
    }
  }
  return out;
}

template <typename T>
Checkpoint<T> deserialize_checkpoint(const std::string& bytes) {
  auto [header, offset] = parse_header(bytes);
  const Precision stored = header_precision(header, "precision");
  ModelConfig config = parse_model_config(header);
  CifModel<T> model = [&] {
    try {
      return CifModel<T>(config);
    } catch (const std::invalid_argument& err) {
      throw CheckpointError(std::string("checkpoint architecture is invalid: ") + err.what());
    }
  }();
  for (const auto& line : header.permutations) apply_permutation(model, line);

  const std::size_t count = header.size_value("blocks");
  Reader reader(bytes, offset);
  std::map<std::string, Block> blocks;
  for (std::size_t i = 0; i < count; ++i) {
    Block b = read_block(reader, stored);
    std::string name = b.name;
    if (!blocks.emplace(name, std::move(b)).second) throw CheckpointError("duplicate checkpoint block '" + name + "'");
  }
  if (!reader.done()) throw CheckpointError("trailing bytes after the last checkpoint block");

  auto params = model.parameters();
  for (auto& p : params) {
    auto it = blocks.find(p.name);
    if (it == blocks.end()) throw CheckpointError("checkpoint is missing parameter '" + p.name + "'");
    fill(p.tensor, it->second);
  }

  Checkpoint<T> out{std::move(model), std::nullopt};
  if (header.has("training")) {
    TrainingState<T> state;
    state.config = parse_train_config(header);
    state.epoch = header.size_value("train.epoch");
    state.adam.step = header.size_value("train.adam_step");
    state.rng_state = header.at("train.rng_state");
    try {
      (void)rng_from_string(state.rng_state);
    } catch (const std::exception&) {
      throw CheckpointError("checkpoint RNG state is malformed");
    }
    if (header.size_value("train.adam_state") != 0) {
      for (const char* which : {"adam.m.", "adam.v."}) {
        auto& dst = std::string(which) == "adam.m." ? state.adam.m : state.adam.v;
        for (const auto& p : params) {
          auto it = blocks.find(which + p.name);
          if (it == blocks.end()) throw CheckpointError("checkpoint is missing optimizer block '" + std::string(which) + p.name + "'");
          if (it->second.shape != p.tensor.shape()) throw CheckpointError("optimizer block '" + it->first + "' has wrong shape");
          std::vector<T> v(it->second.values.size());
          for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<T>(it->second.values[k]);
          dst.push_back(std::move(v));
        }
      }
    }
    out.training = std::move(state);
  }
  return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CifModel<T>& model, const TrainingState<T>* training) {
  const std::string bytes = serialize_checkpoint(model, training);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return deserialize_checkpoint<T>(bytes);
  } catch (const CheckpointError& err) {
    throw CheckpointError(path.string() + ": " + err.what());
  }
}

Precision checkpoint_precision(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    auto [header, offset] = parse_header(bytes);
    (void)offset;
    return header_precision(header, "precision");
  } catch (const CheckpointError& err) {
    throw CheckpointError(path.string() + ": " + err.what());
  }
}

template std::string serialize_checkpoint<float>(const CifModel<float>&, const TrainingState<float>*);
template std::string serialize_checkpoint<double>(const CifModel<double>&, const TrainingState<double>*);
template Checkpoint<float> deserialize_checkpoint<float>(const std::string&);
template Checkpoint<double> deserialize_checkpoint<double>(const std::string&);
template void save_checkpoint<float>(const std::filesystem::path&, const CifModel<float>&, const TrainingState<float>*);
template void save_checkpoint<double>(const std::filesystem::path&, const CifModel<double>&,
                                      const TrainingState<double>*);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace cif
