#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cif/alignment.hpp"
#include "cif/checkpoint.hpp"
#include "cif/metrics.hpp"
#include "cif/training.hpp"

namespace fs = std::filesystem;
using namespace cif;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kData = 3, kNumeric = 4 };

struct Options {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n_points = 2048;
  double temperature = 1.0;
  std::size_t steps = 8;
  std::size_t restarts = 4;
  std::string metric = "all";
  bool table = false;
  std::string gen, ref;
  std::string input, input_b;
  std::size_t count = 10;
  bool raw = false;

  // synth
  std::string family = "lshape";
  double noise = 0.01;

  // train
  std::size_t epochs = 100;
  double lr = 1e-4;
  double decay = 0.8;
  std::size_t decay_every = 10;
  std::size_t batch = 10;
  std::size_t points_f = 256;
  std::size_t points_h = 256;
  std::string precision = "f32";
  double max_grad_norm = 0.0;
  std::size_t checkpoint_every = 0;
  std::string resume;
  ModelConfig model;
  bool full_scale = false;

  // align
  double sigma0 = 0.5;
  std::size_t generations = 150;
  std::size_t max_points = 512;
  double tol_x = 1e-4;

  double tolerance = 1e-4;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
}

fs::path out_dir(const Options& o) {
  require(o.out, "--out");
  fs::create_directories(o.out);
  return o.out;
}

PointCloud prepare(const PointCloud& c, const Options& o) { return o.raw ? c : normalize(c).cloud; }

std::vector<PointCloud> prepare(std::vector<PointCloud> clouds, const Options& o) {
  for (auto& c : clouds) c = prepare(c, o);
  return clouds;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

int run_synth(const Options& o) {
  ShapeFamily family = ShapeFamily::defaults(parse_shape_kind(o.family));
  auto clouds = synth_dataset(family, o.count, o.n_points, o.noise, o.seed);
  fs::path manifest = save_dataset(clouds, out_dir(o), o.family + "_");
  std::cout << "wrote " << clouds.size() << " clouds, manifest " << manifest.string() << "\n";
  return kOk;
}

template <typename T>
int run_train(const Options& o) {
  require(o.manifest, "--manifest");
  const fs::path dir = out_dir(o);
  auto data = prepare(load_manifest_clouds(o.manifest), o);

  TrainOutput output;
  output.dir = dir;
  output.checkpoint_every = o.checkpoint_every;
  output.on_epoch = [](const EpochLog& log) { std::cout << log.tsv() << "\n" << std::flush; };

  if (!o.resume.empty()) {
    Checkpoint<T> ck = load_checkpoint<T>(o.resume);
    if (!ck.training) throw DataError(o.resume + ": checkpoint carries no training state");
    resume<T>(std::move(ck.model), std::move(*ck.training), data, output, o.epochs);
    return kOk;
  }

  ModelConfig mc = o.full_scale ? ModelConfig::full_scale() : o.model;
  mc.seed = o.seed;
  TrainConfig tc;
  tc.lr0 = o.lr;
  tc.decay_factor = o.decay;
  tc.decay_every = o.decay_every;
  tc.epochs = o.epochs;
  tc.clouds_per_batch = o.batch;
  tc.points_f = o.points_f;
  tc.points_h = o.points_h;
  tc.seed = o.seed;
  tc.precision = parse_precision(o.precision);
  tc.max_grad_norm = o.max_grad_norm;
  train<T>(mc, tc, data, output);
  return kOk;
}

template <typename T>
int run_sample(const Options& o, const CifModel<T>& model) {
  const fs::path dir = out_dir(o);
  Rng rng(o.seed);
  std::vector<PointCloud> clouds;
  for (std::size_t i = 0; i < o.count; ++i) {
    PointCloud c = model.sample_cloud(o.n_points, o.temperature, rng);
    c.id = "sample_" + std::to_string(i);
    clouds.push_back(std::move(c));
  }
  save_dataset(clouds, dir, "sample_");
  return kOk;
}

template <typename T>
int run_reconstruct(const Options& o, const CifModel<T>& model) {
  const fs::path dir = out_dir(o);
  std::vector<PointCloud> inputs;
  if (!o.input.empty()) inputs.push_back(load_cloud(o.input));
  else if (!o.manifest.empty()) inputs = load_manifest_clouds(o.manifest);
  else throw CLI::RequiredError("--input or --manifest");
  Rng rng(o.seed);
  std::vector<PointCloud> out;
  for (const auto& c : inputs) out.push_back(model.reconstruct(prepare(c, o), o.n_points, rng));
  save_dataset(out, dir, "reconstruction_");
  return kOk;
}

template <typename T>
int run_interpolate(const Options& o, const CifModel<T>& model) {
  require(o.input, "--input");
  require(o.input_b, "--input-b");
  const fs::path dir = out_dir(o);
  Rng rng(o.seed);
  auto clouds = model.interpolate(prepare(load_cloud(o.input), o), prepare(load_cloud(o.input_b), o), o.steps,
                                  o.n_points, rng);
  save_dataset(clouds, dir, "interp_");
  return kOk;
}

template <typename T>
int run_align(const Options& o, const CifModel<T>& model) {
  require(o.input, "--input");
  const fs::path dir = out_dir(o);
  AlignConfig ac;
  ac.restarts = o.restarts;
  ac.sigma0 = o.sigma0;
  ac.max_generations = o.generations;
  ac.max_points = o.max_points;
  ac.tol_x = o.tol_x;
  ac.seed = o.seed;
  AlignResult r = align_pose(prepare(load_cloud(o.input), o), model, ac);

  std::string text = "angles " + fmt(r.angles[0]) + " " + fmt(r.angles[1]) + " " + fmt(r.angles[2]) + "\n";
  const Matrix3 m = rotation_matrix(r.angles);
  for (int i = 0; i < 3; ++i) text += "rotation_row" + std::to_string(i) + " " + fmt(m[i][0]) + " " + fmt(m[i][1]) + " " + fmt(m[i][2]) + "\n";
  text += "nll " + fmt(r.nll) + "\n";
  text += "initial_nll " + fmt(r.initial_nll) + "\n";
  write_text(dir / "angles.txt", text);
  save_cloud(r.aligned, dir / "aligned.xyz");

  std::string trace = "restart\tgeneration\tbest_so_far\tgeneration_best\tsigma\n";
  for (std::size_t k = 0; k < r.restarts.size(); ++k) {
    for (const auto& g : r.restarts[k].history) {
      trace += std::to_string(k) + "\t" + std::to_string(g.generation) + "\t" + fmt(g.best_value) + "\t" +
               fmt(g.generation_best) + "\t" + fmt(g.sigma) + "\n";
    }
  }
  write_text(dir / "trace.tsv", trace);
  std::cout << text;
  return kOk;
}

template <typename T>
int run_rank(const Options& o, const CifModel<T>& model) {
  require(o.manifest, "--manifest");
  const fs::path dir = out_dir(o);
  auto entries = load_manifest(o.manifest);
  auto clouds = prepare(load_manifest_clouds(o.manifest), o);
  std::string text = "rank\tindex\tid\tscore\tpath\n";
  auto ranked = model.rank_by_embedding_nll(clouds);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& r = ranked[k];
    text += std::to_string(k + 1) + "\t" + std::to_string(r.index) + "\t" + r.id + "\t" + fmt(r.score) + "\t" +
            entries[r.index].path.string() + "\n";
  }
  write_text(dir / "ranking.tsv", text);
  std::cout << text;
  return kOk;
}

int run_eval(const Options& o) {
  require(o.gen, "--gen");
  require(o.ref, "--ref");
  const fs::path dir = out_dir(o);
  EvalOptions eo;
  eo.chamfer = o.metric == "cd" || o.metric == "all";
  eo.emd = o.metric == "emd" || o.metric == "all";
  MetricsReport report = evaluate(load_manifest_clouds(o.gen), load_manifest_clouds(o.ref), eo);
  write_text(dir / "metrics.txt", report.key_values());
  write_text(dir / "metrics.csv", report.csv_header() + "\n" + report.csv_row(o.table) + "\n");
  std::cout << report.key_values();
  return kOk;
}

int run_gradcheck(const Options& o) {
  GradCheckReport r = gradcheck_toy(o.seed);
  std::cout << "max_rel_error " << fmt(r.max_rel_error) << "\n"
            << "coordinates " << r.coordinates << "\n"
            << "worst_parameter " << r.worst_parameter << " index " << r.worst_index << "\n";
  if (!(r.max_rel_error < o.tolerance)) {
    std::cerr << "gradcheck: error " << r.max_rel_error << " exceeds " << o.tolerance << "\n";
    return kNumeric;
  }
  return kOk;
}

template <typename T>
int with_model(const std::string& command, const Options& o) {
  CifModel<T> model = load_checkpoint<T>(o.checkpoint).model;
  if (command == "sample") return run_sample(o, model);
  if (command == "reconstruct") return run_reconstruct(o, model);
  if (command == "interpolate") return run_interpolate(o, model);
  if (command == "align") return run_align(o, model);
  return run_rank(o, model);
}

int dispatch(const std::string& command, const Options& o) {
  if (command == "synth") return run_synth(o);
  if (command == "eval") return run_eval(o);
  if (command == "gradcheck") return run_gradcheck(o);
  if (command == "train") {
    Precision p = o.resume.empty() ? parse_precision(o.precision) : checkpoint_precision(o.resume);
    return p == Precision::F64 ? run_train<double>(o) : run_train<float>(o);
  }
  require(o.checkpoint, "--checkpoint");
  return checkpoint_precision(o.checkpoint) == Precision::F64 ? with_model<double>(command, o)
                                                               : with_model<float>(command, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional invertible flows for point clouds"};
  app.require_subcommand(1);
  Options o;

  auto seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Random seed"); };
  auto out = [&](CLI::App* s, const char* what) { s->add_option("--out", o.out, what); };
  auto checkpoint = [&](CLI::App* s) { s->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required(); };
  auto raw = [&](CLI::App* s) { s->add_flag("--raw", o.raw, "Skip per-cloud normalization of inputs"); };
  auto n_points = [&](CLI::App* s) { s->add_option("--n-points", o.n_points, "Points per output cloud"); };

  auto* synth = app.add_subcommand("synth", "Write a synthetic shape family as cloud files plus a manifest");
  synth->add_option("--family", o.family, "sphere, box, notch, lshape or two-cluster");
  synth->add_option("--count", o.count, "Number of clouds");
  n_points(synth);
  synth->add_option("--noise", o.noise, "Noise std as a fraction of shape size");
  seed(synth);
  out(synth, "Output directory");

  auto* train = app.add_subcommand("train", "Train a model on a manifest");
  train->add_option("--manifest", o.manifest, "Training manifest");
  out(train, "Run directory (checkpoints, loss.tsv)");
  seed(train);
  train->add_option("--epochs", o.epochs, "Total epochs");
  train->add_option("--lr", o.lr, "Initial learning rate");
  train->add_option("--lr-decay", o.decay, "Learning-rate decay factor");
  train->add_option("--decay-every", o.decay_every, "Epochs between decays");
  train->add_option("--batch", o.batch, "Clouds per batch");
  train->add_option("--points-f", o.points_f, "Points per cloud for the point flow");
  train->add_option("--points-h", o.points_h, "Points per cloud for the encoder");
  train->add_option("--precision", o.precision, "f32 or f64");
  train->add_option("--max-grad-norm", o.max_grad_norm, "Gradient norm clip (0 disables)");
  train->add_option("--checkpoint-every", o.checkpoint_every, "Keep a numbered checkpoint every k epochs");
  train->add_option("--resume", o.resume, "Continue from a checkpoint with training state");
  train->add_option("--embedding-dim", o.model.embedding_dim, "Embedding dimension");
  train->add_option("--point-segments", o.model.point_segments, "Point flow segments");
  train->add_option("--point-blocks", o.model.point_blocks, "Point flow blocks per segment");
  train->add_option("--prior-segments", o.model.prior_segments, "Prior flow segments");
  train->add_option("--prior-blocks", o.model.prior_blocks, "Prior flow blocks per segment");
  train->add_option("--hidden", o.model.hidden, "Coupling network width");
  train->add_option("--residual-blocks", o.model.residual_blocks, "Residual blocks per coupling network");
  train->add_flag("--full-scale", o.full_scale, "Use the full-size architecture");
  raw(train);

  auto* sample = app.add_subcommand("sample", "Sample new clouds");
  checkpoint(sample);
  out(sample, "Output directory");
  seed(sample);
  n_points(sample);
  sample->add_option("--temperature", o.temperature, "Embedding prior std multiplier");
  sample->add_option("--count", o.count, "Number of clouds");

  auto* reconstruct = app.add_subcommand("reconstruct", "Encode and decode clouds");
  checkpoint(reconstruct);
  reconstruct->add_option("--input", o.input, "Cloud file");
  reconstruct->add_option("--manifest", o.manifest, "Manifest of clouds");
  out(reconstruct, "Output directory");
  seed(reconstruct);
  n_points(reconstruct);
  raw(reconstruct);

  auto* interpolate = app.add_subcommand("interpolate", "Decode a linear path between two embeddings");
  checkpoint(interpolate);
  interpolate->add_option("--input", o.input, "First cloud");
  interpolate->add_option("--input-b", o.input_b, "Second cloud");
  interpolate->add_option("--steps", o.steps, "Clouds along the path, endpoints included");
  out(interpolate, "Output directory");
  seed(interpolate);
  n_points(interpolate);
  raw(interpolate);

  auto* align = app.add_subcommand("align", "Recover the canonical pose of a cloud");
  checkpoint(align);
  align->add_option("--input", o.input, "Cloud file");
  align->add_option("--restarts", o.restarts, "CMA-ES restarts");
  align->add_option("--sigma0", o.sigma0, "Initial step size (radians)");
  align->add_option("--generations", o.generations, "Generations per restart");
  align->add_option("--max-points", o.max_points, "Objective subsample (0: all points)");
  align->add_option("--tol-x", o.tol_x, "Stop a restart once its step size falls below this (radians)");
  out(align, "Output directory (angles.txt, aligned.xyz, trace.tsv)");
  seed(align);
  raw(align);

  auto* rank = app.add_subcommand("rank", "Rank clouds by embedding negative log-likelihood, rarest first");
  checkpoint(rank);
  rank->add_option("--manifest", o.manifest, "Manifest of clouds");
  out(rank, "Output directory (ranking.tsv)");
  raw(rank);

  auto* eval = app.add_subcommand("eval", "Compare a generated corpus to a reference corpus");
  eval->add_option("--gen", o.gen, "Generated manifest");
  eval->add_option("--ref", o.ref, "Reference manifest");
  eval->add_option("--metric", o.metric, "cd, emd or all")->check(CLI::IsMember({"cd", "emd", "all"}));
  eval->add_flag("--table", o.table, "Scale the CSV row for tables");
  out(eval, "Output directory (metrics.txt, metrics.csv)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the training loss gradient");
  seed(gradcheck);
  gradcheck->add_option("--tolerance", o.tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, o);
  } catch (const CLI::RequiredError& e) {
    std::cerr << command << ": missing " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << command << ": numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kOther;
  }
}
