// Copyright 2026 The MMGP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmgp/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json_io.h"
#include "mmgp/error.h"
#include "parallel.h"

namespace mmgp {
namespace {

using internal::json;

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw Error(ErrorCode::kIo, "not a number in CSV: '" + text + "'");
  }
  return v;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void RequireFile(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, "missing input: " + path.string());
  }
}

SetSpec SetFromJson(const json& j, std::uint64_t derived_seed) {
  SetSpec s;
  s.seed = j.value("seed", derived_seed);
  if (j.contains("positions")) {
    for (const json& p : j["positions"]) s.positions.push_back(internal::ToVec3(p));
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    const std::vector<Vec3> grid =
        GridPositions(internal::ToVec3(g.at("origin")), g.at("spacing").get<double>(),
                      g.at("nx").get<int>(), g.at("ny").get<int>());
    s.positions.insert(s.positions.end(), grid.begin(), grid.end());
  }
  if (j.contains("random")) {
    const json& r = j["random"];
    const std::vector<Vec3> pts = RandomPositions(
        internal::ToVec3(r.at("min")), internal::ToVec3(r.at("max")),
        r.at("count").get<int>(), r.value("seed", SplitMix(s.seed + 1)));
    const std::string order = r.value("order", std::string("random"));
    if (order == "path") {
      const std::vector<Vec3> path = AdjacencyPath(pts);
      s.positions.insert(s.positions.end(), path.begin(), path.end());
    } else if (order == "random") {
      s.positions.insert(s.positions.end(), pts.begin(), pts.end());
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown position order: " + order);
    }
  }
  s.signal = ParseSignalKind(j.value("signal", std::string("wgn")));
  s.audio_path = j.value("audio_path", std::string());
  s.duration_s = j.value("duration_s", s.duration_s);
  s.Validate();
  return s;
}

Hyperparameters HyperparametersFromJson(const json& j) {
  Hyperparameters hp;
  hp.eps = j.at("eps").get<std::vector<double>>();
  if (j.contains("sigma2")) {
    const json& s = j["sigma2"];
    hp.sigma2 = s.is_array() ? s.get<std::vector<double>>()
                             : std::vector<double>{s.get<double>()};
  }
  if (j.contains("jitter") && !j["jitter"].is_null()) {
    hp.jitter = j["jitter"].get<double>();
  }
  return hp;
}

OptimizerConfig OptimizerFromJson(const json& j) {
  OptimizerConfig c;
  c.max_iters = j.value("max_iters", c.max_iters);
  c.step = j.value("step", c.step);
  c.backtrack = j.value("backtrack", c.backtrack);
  c.grad_tol = j.value("grad_tol", c.grad_tol);
  c.value_tol = j.value("value_tol", c.value_tol);
  c.log_space = j.value("log_space", c.log_space);
  c.per_coordinate_sigma2 = j.value("per_coordinate_sigma2", c.per_coordinate_sigma2);
  c.learn_sigma2 = j.value("learn_sigma2", c.learn_sigma2);
  if (j.contains("learn_eps")) c.learn_eps = j["learn_eps"].get<std::vector<bool>>();
  c.Validate();
  return c;
}

ExperimentConfig FromDocument(const json& j) {
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.scene = internal::SceneFromJson(j.at("scene"));
  cfg.scene.Validate();
  const json empty = json::object();
  cfg.labelled = SetFromJson(j.value("labelled", empty), SplitMix(cfg.seed ^ 1));
  cfg.unlabelled = SetFromJson(j.value("unlabelled", empty), SplitMix(cfg.seed ^ 2));
  cfg.test = SetFromJson(j.value("test", empty), SplitMix(cfg.seed ^ 3));
  if (!j.contains("unlabelled") || !j["unlabelled"].contains("signal")) {
    cfg.unlabelled.signal = SignalKind::kSpeechSurrogate;
  }
  if (!j.contains("test") || !j["test"].contains("signal")) {
    cfg.test.signal = SignalKind::kSpeechSurrogate;
  }
  cfg.spectral = internal::SpectralFromJson(j.value("spectral", empty));
  cfg.spectral.Validate(cfg.scene.sample_rate);
  const json hp = j.value("hyperparameters", json("learn"));
  if (hp.is_string()) {
    if (hp.get<std::string>() != "learn") {
      throw Error(ErrorCode::kInvalidArgument,
                  "hyperparameters must be \"learn\" or an object");
    }
  } else {
    cfg.hyperparameters = HyperparametersFromJson(hp);
    cfg.hyperparameters->Validate(cfg.scene.num_nodes());
  }
  if (j.contains("initial_hyperparameters")) {
    cfg.initial_hyperparameters = HyperparametersFromJson(j["initial_hyperparameters"]);
  }
  cfg.optimizer = OptimizerFromJson(j.value("optimizer", empty));
  cfg.method = ParseMethod(j.value("method", std::string("mmgp")));
  cfg.streaming = j.value("streaming", true);
  if (j.contains("shuffle_seed") && !j["shuffle_seed"].is_null()) {
    cfg.shuffle_seed = j["shuffle_seed"].get<std::uint64_t>();
  }
  cfg.coordinates = j.value("coordinates", cfg.coordinates);
  if (cfg.coordinates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "coordinates must not be empty");
  }
  for (int c : cfg.coordinates) {
    if (c < 0 || c > 2) {
      throw Error(ErrorCode::kInvalidArgument, "coordinates must be 0, 1 or 2");
    }
  }
  const json srp = j.value("srp", empty);
  if (srp.contains("grid_min")) cfg.srp.grid_min = internal::ToVec3(srp["grid_min"]);
  if (srp.contains("grid_max")) cfg.srp.grid_max = internal::ToVec3(srp["grid_max"]);
  cfg.srp.resolution = srp.value("resolution", cfg.srp.resolution);
  cfg.srp.frame_size = srp.value("frame_size", cfg.srp.frame_size);
  cfg.block_size = j.value("block_size", cfg.block_size);
  if (cfg.block_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "block_size must be >= 1");
  }
  cfg.output = j.value("output", std::string("out"));
  json hashed = j;
  hashed.erase("output");
  cfg.document = j.dump();
  cfg.hash = HashHex(hashed.dump());
  return cfg;
}

Eigen::MatrixXd PositionMatrix(std::span<const AggregatedRtf> samples,
                               const std::vector<int>& coordinates) {
  Eigen::MatrixXd p(samples.size(), coordinates.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].position) {
      throw Error(ErrorCode::kInvalidArgument, "labelled sample has no position");
    }
    for (std::size_t c = 0; c < coordinates.size(); ++c) {
      p(i, c) = (*samples[i].position)(coordinates[c]);
    }
  }
  return p;
}

Hyperparameters InitialHyperparameters(const ExperimentConfig& cfg,
                                       std::span<const AggregatedRtf> training,
                                       double eps_scale) {
  if (cfg.initial_hyperparameters) return *cfg.initial_hyperparameters;
  Hyperparameters hp;
  hp.eps = MedianHeuristicEps(training);
  for (double& e : hp.eps) e *= eps_scale;
  hp.sigma2.assign(cfg.optimizer.per_coordinate_sigma2 ? cfg.coordinates.size() : 1,
                   1e-2);
  return hp;
}

// Runs the optimizer unless the configuration fixes the hyperparameters.
Hyperparameters Learn(const ExperimentConfig& cfg, const CovarianceFamily& family,
                      const Eigen::MatrixXd& positions, Hyperparameters initial,
                      const std::filesystem::path& trace_csv) {
  if (cfg.hyperparameters) return *cfg.hyperparameters;
  OptimizerConfig opt = cfg.optimizer;
  if (!opt.learn_eps.empty() &&
      static_cast<int>(opt.learn_eps.size()) != family.num_eps()) {
    opt.learn_eps.clear();
  }
  if (opt.per_coordinate_sigma2 && initial.sigma2.size() == 1) {
    initial.sigma2.assign(positions.cols(), initial.sigma2.front());
  }
  const OptimizeResult result = Optimize(family, positions, initial, opt);
  if (!result.warning.empty()) {
    std::fprintf(stderr, "warning: %s\n", result.warning.c_str());
  }
  if (!trace_csv.empty()) {
    if (trace_csv.has_parent_path()) {
      std::filesystem::create_directories(trace_csv.parent_path());
    }
    WriteTraceCsv(trace_csv, result, cfg.hash);
  }
  return result.hp;
}

struct LoadedSets {
  DatasetManifest manifest;
  std::vector<AggregatedRtf> labelled;
  std::vector<AggregatedRtf> unlabelled;
  std::vector<AggregatedRtf> test;
  std::vector<std::string> test_ids;
  Eigen::MatrixXd positions;
};

LoadedSets LoadSets(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    bool need_test) {
  RequireFile(dir / kManifestName);
  LoadedSets s;
  s.manifest = ReadManifest(dir / kManifestName);
  s.labelled = LoadFeatures(dir, s.manifest, Role::kLabelled);
  s.unlabelled = LoadFeatures(dir, s.manifest, Role::kUnlabelled);
  if (s.labelled.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "dataset has no labelled records");
  }
  s.positions = PositionMatrix(s.labelled, cfg.coordinates);
  if (need_test) {
    s.test = LoadFeatures(dir, s.manifest, Role::kTest);
    for (const RecordEntry* r : s.manifest.WithRole(Role::kTest)) {
      s.test_ids.push_back(r->id);
    }
  }
  return s;
}

// Processing order of the test stream: manifest order, or with a shuffle
// seed, a local mix where a sample moves by less than block_size places.
std::vector<std::size_t> StreamOrder(std::size_t n, const ExperimentConfig& cfg) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (cfg.shuffle_seed) {
    std::mt19937_64 rng(*cfg.shuffle_seed);
    std::uniform_real_distribution<double> u(0.0, cfg.block_size);
    std::vector<double> key(n);
    for (std::size_t i = 0; i < n; ++i) key[i] = static_cast<double>(i) + u(rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  }
  return order;
}

EstimateRow MakeRow(const std::string& id, Eigen::VectorXd estimate,
                    Eigen::VectorXd variance) {
  return EstimateRow{id, std::move(estimate), std::move(variance)};
}

void WriteMetricsCsv(const std::filesystem::path& path, const Metrics& m,
                     const std::string& hash) {
  std::ofstream out = OpenOut(path);
  out << "kind,index,id,value,config_hash\n";
  out << "rmse,0,," << FormatDouble(m.rmse) << ',' << hash << '\n';
  for (std::size_t i = 0; i < m.errors.size(); ++i) {
    out << "error," << i << ',' << m.ids[i] << ',' << FormatDouble(m.errors[i])
        << ',' << hash << '\n';
  }
  for (std::size_t b = 0; b < m.block_means.size(); ++b) {
    out << "block_mean," << b << ",," << FormatDouble(m.block_means[b]) << ','
        << hash << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string EstimatesHash(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  if (!std::getline(in, line)) return {};
  const std::vector<std::string> cells = SplitCsv(line);
  return cells.empty() ? std::string() : cells.back();
}

}  // namespace

std::vector<Vec3> AdjacencyPath(const std::vector<Vec3>& points) {
  std::vector<Vec3> path;
  if (points.empty()) return path;
  std::vector<bool> used(points.size(), false);
  std::size_t cur = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].sum() < points[cur].sum()) cur = i;
  }
  for (std::size_t step = 0; step < points.size(); ++step) {
    used[cur] = true;
    path.push_back(points[cur]);
    std::size_t next = points.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (used[j]) continue;
      const double d = (points[j] - points[cur]).squaredNorm();
      if (d < best) {
        best = d;
        next = j;
      }
    }
    cur = next;
  }
  return path;
}

Method ParseMethod(const std::string& name) {
  if (name == "mmgp") return Method::kMmgp;
  if (name == "mean") return Method::kMean;
  if (name == "kernel-product") return Method::kKernelProduct;
  if (name == "srp-phat") return Method::kSrpPhat;
  throw Error(ErrorCode::kInvalidArgument, "unknown method: " + name);
}

std::string MethodName(Method method) {
  switch (method) {
    case Method::kMmgp:
      return "mmgp";
    case Method::kMean:
      return "mean";
    case Method::kKernelProduct:
      return "kernel-product";
    case Method::kSrpPhat:
      return "srp-phat";
  }
  return "?";
}

ExperimentConfig ParseExperimentConfig(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("malformed config: ") + e.what());
  }
  try {
    return FromDocument(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseExperimentConfig(ss.str());
}

void ApplyOverrides(ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                    std::optional<std::string> method,
                    std::optional<bool> streaming,
                    std::optional<std::filesystem::path> output) {
  json j = json::parse(cfg.document);
  if (seed) j["seed"] = *seed;
  if (method) j["method"] = *method;
  if (streaming) j["streaming"] = *streaming;
  if (output) j["output"] = output->string();
  cfg = ParseExperimentConfig(j.dump());
}

void WriteEstimatesCsv(const std::filesystem::path& path,
                       const std::vector<EstimateRow>& rows,
                       const std::vector<int>& coordinates,
                       const std::string& config_hash) {
  static constexpr const char* kNames[] = {"x", "y", "z"};
  std::ofstream out = OpenOut(path);
  out << "id";
  for (int c : coordinates) out << ',' << kNames[c];
  for (int c : coordinates) out << ",var_" << kNames[c];
  out << ",config_hash\n";
  for (const EstimateRow& r : rows) {
    out << r.id;
    for (Eigen::Index c = 0; c < r.estimate.size(); ++c) {
      out << ',' << FormatDouble(r.estimate(c));
    }
    for (Eigen::Index c = 0; c < r.variance.size(); ++c) {
      out << ',' << FormatDouble(r.variance(c));
    }
    out << ',' << config_hash << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<EstimateRow> ReadEstimatesCsv(const std::filesystem::path& path,
                                          std::vector<int>* coordinates) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kIo, "empty estimates file " + path.string());
  }
  const std::vector<std::string> header = SplitCsv(line);
  std::vector<int> coords;
  for (const std::string& h : header) {
    if (h == "x") coords.push_back(0);
    if (h == "y") coords.push_back(1);
    if (h == "z") coords.push_back(2);
  }
  const std::size_t n = coords.size();
  if (n == 0 || header.size() != 2 * n + 2 || header.front() != "id") {
    throw Error(ErrorCode::kIo, "unexpected estimates header in " + path.string());
  }
  std::vector<EstimateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = SplitCsv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kIo, "ragged estimates row: " + line);
    }
    EstimateRow r{cells[0], Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (std::size_t c = 0; c < n; ++c) {
      r.estimate(c) = ParseDouble(cells[1 + c]);
      r.variance(c) = ParseDouble(cells[1 + n + c]);
    }
    rows.push_back(std::move(r));
  }
  if (coordinates) *coordinates = coords;
  return rows;
}

Metrics ComputeMetrics(const std::vector<EstimateRow>& estimates,
                       const std::vector<int>& coordinates,
                       const DatasetManifest& truth, int block_size) {
  if (block_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "block_size must be >= 1");
  }
  if (estimates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no estimates to evaluate");
  }
  std::map<std::string, Vec3> positions;
  for (const RecordEntry& r : truth.records) {
    if (r.position) positions[r.id] = *r.position;
  }
  Metrics m;
  double sum_sq = 0.0;
  for (const EstimateRow& row : estimates) {
    const auto it = positions.find(row.id);
    if (it == positions.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no true position for record " + row.id);
    }
    if (row.estimate.size() != static_cast<Eigen::Index>(coordinates.size())) {
      throw Error(ErrorCode::kInvalidArgument, "estimate dimension mismatch");
    }
    double sq = 0.0;
    for (std::size_t c = 0; c < coordinates.size(); ++c) {
      const double d = row.estimate(c) - it->second(coordinates[c]);
      sq += d * d;
    }
    m.ids.push_back(row.id);
    m.errors.push_back(std::sqrt(sq));
    sum_sq += sq;
  }
  m.rmse = std::sqrt(sum_sq / estimates.size());
  for (std::size_t b = 0; b < m.errors.size(); b += block_size) {
    const std::size_t e = std::min(m.errors.size(), b + block_size);
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += m.errors[i];
    m.block_means.push_back(s / (e - b));
  }
  return m;
}

std::filesystem::path DatasetDir(const ExperimentConfig& cfg) {
  return cfg.output / "dataset";
}

std::filesystem::path ModelPath(const ExperimentConfig& cfg) {
  return cfg.output / "model.mmgp";
}

DatasetManifest CmdSimulate(const ExperimentConfig& cfg) {
  return GenerateDataset(cfg.scene, cfg.labelled, cfg.unlabelled, cfg.test,
                         DatasetDir(cfg), cfg.hash);
}

DatasetManifest CmdFeatures(const std::filesystem::path& dataset_dir,
                            const ExperimentConfig& cfg) {
  RequireFile(dataset_dir / kManifestName);
  DatasetManifest manifest = ReadManifest(dataset_dir / kManifestName);
  const double fs = manifest.scene.sample_rate;
  const int channels = 2 * manifest.scene.num_nodes();
  cfg.spectral.Validate(fs);
  std::filesystem::create_directories(dataset_dir / "features");
  std::vector<AggregatedRtf> features(manifest.records.size());
  internal::ParallelFor(manifest.records.size(), [&](std::size_t i) {
    RecordEntry& r = manifest.records[i];
    RequireFile(dataset_dir / r.signal_file);
    const MeasurementRecord record =
        ReadRecordSignals(dataset_dir / r.signal_file, channels);
    features[i] = ExtractFeatures(record, cfg.spectral, fs);
    r.feature_file = "features/" + r.id + ".c64";
    WriteRecordFeatures(dataset_dir / r.feature_file, features[i]);
  });
  FeatureInfo info;
  info.spectral = cfg.spectral;
  info.num_nodes = manifest.scene.num_nodes();
  if (!features.empty()) {
    const RtfVector& first = features.front().per_node.front();
    info.dim = static_cast<int>(first.size());
    info.bin_frequencies.assign(first.bin_frequencies.data(),
                                first.bin_frequencies.data() +
                                    first.bin_frequencies.size());
  }
  info.hash = HashHex(manifest.config_hash + "|" +
                      internal::SpectralToJson(cfg.spectral).dump());
  manifest.features = info;
  WriteManifest(dataset_dir / kManifestName, manifest);

  const std::filesystem::path eval_path = dataset_dir / kEvaluationManifestName;
  if (std::filesystem::exists(eval_path)) {
    DatasetManifest eval = ReadManifest(eval_path);
    std::map<std::string, std::string> files;
    for (const RecordEntry& r : manifest.records) files[r.id] = r.feature_file;
    for (RecordEntry& r : eval.records) r.feature_file = files[r.id];
    eval.features = info;
    WriteManifest(eval_path, eval);
  }
  return manifest;
}

MmgpModel CmdFit(const std::filesystem::path& dataset_dir,
                 const ExperimentConfig& cfg,
                 const std::filesystem::path& model_path) {
  const LoadedSets s = LoadSets(dataset_dir, cfg, false);
  std::vector<AggregatedRtf> training = s.labelled;
  training.insert(training.end(), s.unlabelled.begin(), s.unlabelled.end());
  const MmgpCovarianceFamily family(s.labelled, s.unlabelled);
  const std::filesystem::path trace =
      model_path.parent_path() / (model_path.stem().string() + "_trace.csv");
  const Hyperparameters hp =
      Learn(cfg, family, s.positions, InitialHyperparameters(cfg, training, 1.0),
            trace);
  MmgpModel model = MmgpModel::Fit(s.labelled, s.unlabelled, s.positions, hp);
  model.set_source_hash(s.manifest.features->hash);
  if (model_path.has_parent_path()) {
    std::filesystem::create_directories(model_path.parent_path());
  }
  model.Save(model_path);
  return model;
}

std::vector<EstimateRow> CmdLocalize(const std::filesystem::path& model_path,
                                     const std::filesystem::path& dataset_dir,
                                     const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_csv) {
  RequireFile(model_path);
  RequireFile(dataset_dir / kManifestName);
  MmgpModel model = MmgpModel::Load(model_path);
  const DatasetManifest manifest = ReadManifest(dataset_dir / kManifestName);
  if (!manifest.features) {
    throw Error(ErrorCode::kInvalidArgument,
                "dataset has no features; run the features command first");
  }
  if (model.source_hash() != manifest.features->hash) {
    throw Error(ErrorCode::kHashMismatch,
                "model was fitted on features " + model.source_hash() +
                    " but the dataset has " + manifest.features->hash);
  }
  if (model.num_coordinates() != static_cast<int>(cfg.coordinates.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "model coordinate count differs from the config");
  }
  const std::vector<AggregatedRtf> test =
      LoadFeatures(dataset_dir, manifest, Role::kTest);
  const std::vector<const RecordEntry*> entries = manifest.WithRole(Role::kTest);
  std::vector<EstimateRow> rows;
  for (std::size_t i : StreamOrder(test.size(), cfg)) {
    const Prediction p =
        cfg.streaming ? model.PredictRecursive(test[i]) : model.Predict(test[i]);
    rows.push_back(MakeRow(entries[i]->id, p.estimate, p.variance));
  }
  WriteEstimatesCsv(out_csv, rows, cfg.coordinates, cfg.hash);
  return rows;
}

Metrics CmdEvaluate(const std::filesystem::path& estimates_csv,
                    const std::filesystem::path& evaluation_manifest,
                    int block_size, const std::filesystem::path& out_csv) {
  RequireFile(estimates_csv);
  RequireFile(evaluation_manifest);
  std::vector<int> coords;
  const std::vector<EstimateRow> rows = ReadEstimatesCsv(estimates_csv, &coords);
  const DatasetManifest truth = ReadManifest(evaluation_manifest);
  const Metrics m = ComputeMetrics(rows, coords, truth, block_size);
  WriteMetricsCsv(out_csv, m, EstimatesHash(estimates_csv));
  return m;
}

std::vector<EstimateRow> CmdBaseline(Method method,
                                     const std::filesystem::path& dataset_dir,
                                     const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_csv) {
  const std::filesystem::path trace_dir =
      out_csv.has_parent_path() ? out_csv.parent_path() : ".";
  const std::string prefix = "trace_" + MethodName(method);
  std::vector<EstimateRow> rows;
  const Eigen::Index nc = static_cast<Eigen::Index>(cfg.coordinates.size());
  const Eigen::VectorXd no_variance =
      Eigen::VectorXd::Constant(nc, std::numeric_limits<double>::quiet_NaN());

  if (method == Method::kSrpPhat) {
    RequireFile(dataset_dir / kManifestName);
    const DatasetManifest manifest = ReadManifest(dataset_dir / kManifestName);
    SrpConfig srp;
    srp.grid_min = cfg.srp.grid_min;
    srp.grid_max = cfg.srp.grid_max;
    if ((srp.grid_max - srp.grid_min).norm() == 0.0) {
      // Unset box: the bounding box of the labelled grid.
      const std::vector<const RecordEntry*> lab = manifest.WithRole(Role::kLabelled);
      if (lab.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "SRP grid box is not configured");
      }
      srp.grid_min = srp.grid_max = *lab.front()->position;
      for (const RecordEntry* r : lab) {
        srp.grid_min = srp.grid_min.cwiseMin(*r->position);
        srp.grid_max = srp.grid_max.cwiseMax(*r->position);
      }
    }
    srp.resolution = cfg.srp.resolution;
    srp.frame_size = cfg.srp.frame_size;
    srp.band_low_hz = cfg.spectral.band_low_hz;
    srp.band_high_hz = cfg.spectral.band_high_hz;
    srp.sample_rate = manifest.scene.sample_rate;
    srp.sound_speed = manifest.scene.sound_speed;
    srp.mic_positions = manifest.scene.microphones();
    const std::vector<const RecordEntry*> test = manifest.WithRole(Role::kTest);
    rows.resize(test.size());
    internal::ParallelFor(test.size(), [&](std::size_t i) {
      RequireFile(dataset_dir / test[i]->signal_file);
      const MeasurementRecord record = ReadRecordSignals(
          dataset_dir / test[i]->signal_file, 2 * manifest.scene.num_nodes());
      const Vec3 q = SrpPhat(record, srp);
      Eigen::VectorXd est(nc);
      for (Eigen::Index c = 0; c < nc; ++c) est(c) = q(cfg.coordinates[c]);
      rows[i] = MakeRow(test[i]->id, est, no_variance);
    });
    WriteEstimatesCsv(out_csv, rows, cfg.coordinates, cfg.hash);
    return rows;
  }

  const LoadedSets s = LoadSets(dataset_dir, cfg, true);
  if (method == Method::kMean) {
    const int num_nodes = s.labelled.front().num_nodes();
    std::vector<Hyperparameters> node_hps;
    for (int m = 0; m < num_nodes; ++m) {
      std::vector<AggregatedRtf> lab, unl;
      for (const AggregatedRtf& a : s.labelled) lab.push_back(RestrictToNode(a, m));
      for (const AggregatedRtf& a : s.unlabelled) unl.push_back(RestrictToNode(a, m));
      if (cfg.hyperparameters) {
        Hyperparameters hp = *cfg.hyperparameters;
        hp.eps = {hp.eps.at(m)};
        node_hps.push_back(hp);
        continue;
      }
      std::vector<AggregatedRtf> training = lab;
      training.insert(training.end(), unl.begin(), unl.end());
      const MmgpCovarianceFamily family(lab, unl);
      Hyperparameters init = InitialHyperparameters(cfg, training, 1.0);
      if (init.eps.size() != 1) init.eps = {init.eps.at(m)};
      node_hps.push_back(Learn(cfg, family, s.positions, init,
                               trace_dir / (prefix + "_node" +
                                            std::to_string(m) + ".csv")));
    }
    const MeanOfNodes model =
        MeanOfNodes::FitPerNode(s.labelled, s.unlabelled, s.positions, node_hps);
    for (std::size_t i = 0; i < s.test.size(); ++i) {
      rows.push_back(MakeRow(s.test_ids[i], model.Predict(s.test[i]), no_variance));
    }
  } else if (method == Method::kKernelProduct) {
    const ProductKernelFamily family(s.labelled);
    // The product kernel sums M exponents; start each eps M times wider.
    const Hyperparameters hp =
        Learn(cfg, family, s.positions,
              InitialHyperparameters(cfg, s.labelled,
                                     s.labelled.front().num_nodes()),
              trace_dir / (prefix + ".csv"));
    const KernelProductGp model = KernelProductGp::Fit(s.labelled, s.positions, hp);
    for (std::size_t i = 0; i < s.test.size(); ++i) {
      const Prediction p = model.Predict(s.test[i]);
      rows.push_back(MakeRow(s.test_ids[i], p.estimate, p.variance));
    }
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "mmgp is not a baseline; use fit and localize");
  }
  WriteEstimatesCsv(out_csv, rows, cfg.coordinates, cfg.hash);
  return rows;
}

std::vector<SweepRow> CmdSweep(const std::filesystem::path& dataset_dir,
                               const ExperimentConfig& cfg, int node,
                               const std::vector<double>& values,
                               const std::filesystem::path& out_csv) {
  const LoadedSets s = LoadSets(dataset_dir, cfg, true);
  const int num_nodes = s.labelled.front().num_nodes();
  if (node < 0 || node >= num_nodes) {
    throw Error(ErrorCode::kInvalidArgument, "sweep node out of range");
  }
  RequireFile(dataset_dir / kEvaluationManifestName);
  const DatasetManifest truth = ReadManifest(dataset_dir / kEvaluationManifestName);
  std::vector<AggregatedRtf> training = s.labelled;
  training.insert(training.end(), s.unlabelled.begin(), s.unlabelled.end());
  const MmgpCovarianceFamily family(s.labelled, s.unlabelled);
  const Hyperparameters base =
      Learn(cfg, family, s.positions, InitialHyperparameters(cfg, training, 1.0), {});

  std::vector<SweepRow> rows(values.size());
  internal::ParallelFor(values.size(), [&](std::size_t k) {
    Hyperparameters hp = base;
    hp.eps[node] = values[k];
    hp.jitter = ResolveJitter(base, family.Covariance(base.eps));
    const MmgpModel model = MmgpModel::Fit(s.labelled, s.unlabelled, s.positions, hp);
    std::vector<EstimateRow> est;
    for (std::size_t i = 0; i < s.test.size(); ++i) {
      const Prediction p = model.Predict(s.test[i]);
      est.push_back(MakeRow(s.test_ids[i], p.estimate, p.variance));
    }
    rows[k].eps = values[k];
    rows[k].log_likelihood = LogLikelihood(hp, family, s.positions);
    rows[k].rmse = ComputeMetrics(est, cfg.coordinates, truth, cfg.block_size).rmse;
  });
  std::ofstream out = OpenOut(out_csv);
  out << "eps,log_likelihood,rmse,config_hash\n";
  for (const SweepRow& r : rows) {
    out << FormatDouble(r.eps) << ',' << FormatDouble(r.log_likelihood) << ','
        << FormatDouble(r.rmse) << ',' << cfg.hash << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + out_csv.string());
  return rows;
}

Metrics CmdRun(const ExperimentConfig& cfg) {
  const std::filesystem::path dir = DatasetDir(cfg);
  CmdSimulate(cfg);
  CmdFeatures(dir, cfg);
  const std::filesystem::path estimates = cfg.output / "estimates.csv";
  if (cfg.method == Method::kMmgp) {
    CmdFit(dir, cfg, ModelPath(cfg));
    CmdLocalize(ModelPath(cfg), dir, cfg, estimates);
  } else {
    CmdBaseline(cfg.method, dir, cfg, estimates);
  }
  return CmdEvaluate(estimates, dir / kEvaluationManifestName, cfg.block_size,
                     cfg.output / "metrics.csv");
}

}  // namespace mmgp
