#include "egdiff/io.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace egdiff {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, const Dataset2D& ds) {
  std::ofstream out = open_out(path);
  out << "x1,x2";
  if (ds.has_energies()) out << ",energy";
  if (ds.has_labels()) out << ",label";
  out << "\n";
  for (int i = 0; i < ds.size(); ++i) {
    out << format_double(ds.points(i, 0)) << "," << format_double(ds.points(i, 1));
    if (ds.has_energies()) out << "," << format_double(ds.energies[i]);
    if (ds.has_labels()) out << "," << ds.labels[i];
    out << "\n";
  }
}

Dataset2D read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path.string());
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "x1" || header[1] != "x2") {
    throw IoError("bad dataset header in " + path.string());
  }
  bool has_energy = false, has_label = false;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i] == "energy") has_energy = true;
    else if (header[i] == "label") has_label = true;
    else throw IoError("unknown dataset column '" + header[i] + "'");
  }

  std::vector<double> xs, ys, es;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    std::size_t expect = 2 + (has_energy ? 1 : 0) + (has_label ? 1 : 0);
    if (f.size() != expect) throw IoError("bad dataset row in " + path.string());
    xs.push_back(std::stod(f[0]));
    ys.push_back(std::stod(f[1]));
    std::size_t col = 2;
    if (has_energy) es.push_back(std::stod(f[col++]));
    if (has_label) labels.push_back(std::stoi(f[col]));
  }

  Dataset2D ds;
  ds.points.resize(static_cast<Eigen::Index>(xs.size()), 2);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ds.points(static_cast<Eigen::Index>(i), 0) = xs[i];
    ds.points(static_cast<Eigen::Index>(i), 1) = ys[i];
  }
  if (has_energy) {
    ds.energies = Eigen::Map<Eigen::VectorXd>(es.data(), static_cast<Eigen::Index>(es.size()));
  }
  ds.labels = std::move(labels);
  return ds;
}

void write_samples_csv(const std::filesystem::path& path,
                       const Eigen::MatrixXd& samples) {
  std::ofstream out = open_out(path);
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    out << (j ? "," : "") << "x" << (j + 1);
  }
  out << "\n";
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      out << (j ? "," : "") << format_double(samples(i, j));
    }
    out << "\n";
  }
}

Eigen::MatrixXd read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty samples file: " + path.string());
  const std::size_t dim = split_csv_line(line).size();
  std::vector<double> vals;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != dim) throw IoError("bad samples row in " + path.string());
    for (const std::string& s : f) vals.push_back(std::stod(s));
    ++rows;
  }
  Eigen::MatrixXd m(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = vals[i * dim + j];
  }
  return m;
}

void write_transitions_csv(const std::filesystem::path& path,
                           const TransitionDataset& ds) {
  std::ofstream out = open_out(path);
  out << "s1,s2,a1,a2,r,s1n,s2n,done\n";
  for (const auto& row : ds.rows) {
    const auto s = ds.states.row(row.s);
    const auto sn = ds.states.row(row.s_next);
    out << format_double(s[0]) << "," << format_double(s[1]) << ","
        << format_double(row.a[0]) << "," << format_double(row.a[1]) << ","
        << format_double(row.r) << "," << format_double(sn[0]) << ","
        << format_double(sn[1]) << "," << (row.done ? 1 : 0) << "\n";
  }
}

TransitionDataset read_transitions_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty transitions file");
  if (line != "s1,s2,a1,a2,r,s1n,s2n,done") {
    throw IoError("bad transitions header in " + path.string());
  }
  TransitionDataset ds;
  std::vector<Eigen::Vector2d> states;
  int prev_next = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 8) throw IoError("bad transitions row in " + path.string());
    const Eigen::Vector2d s(std::stod(f[0]), std::stod(f[1]));
    const Eigen::Vector2d a(std::stod(f[2]), std::stod(f[3]));
    const double r = std::stod(f[4]);
    const Eigen::Vector2d sn(std::stod(f[5]), std::stod(f[6]));
    const bool done = std::stoi(f[7]) != 0;

    int s_idx;
    if (prev_next >= 0 && states[prev_next] == s) {
      s_idx = prev_next;
    } else {
      states.push_back(s);
      s_idx = static_cast<int>(states.size()) - 1;
    }
    states.push_back(sn);
    const int next_idx = static_cast<int>(states.size()) - 1;
    ds.rows.push_back({s_idx, next_idx, a, r, done});
    prev_next = next_idx;
  }
  ds.states.resize(static_cast<Eigen::Index>(states.size()), 2);
  for (std::size_t i = 0; i < states.size(); ++i) {
    ds.states.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
  }
  return ds;
}

void write_support_json(const std::filesystem::path& path,
                        const SupportActionSet& support) {
  json doc;
  doc["k"] = support.k();
  json actions = json::object();
  for (std::size_t i = 0; i < support.actions.size(); ++i) {
    json rows = json::array();
    const Eigen::MatrixXd& m = support.actions[i];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rows.push_back({m(r, 0), m(r, 1)});
    }
    actions[std::to_string(i)] = std::move(rows);
  }
  doc["actions"] = std::move(actions);
  open_out(path) << doc.dump(2) << "\n";
}

SupportActionSet read_support_json(const std::filesystem::path& path) {
  json doc = json::parse(open_in(path));
  SupportActionSet support;
  const auto& actions = doc.at("actions");
  support.actions.resize(actions.size());
  for (const auto& [key, rows] : actions.items()) {
    const std::size_t idx = std::stoul(key);
    if (idx >= support.actions.size()) {
      throw IoError("support set: state index out of range");
    }
    Eigen::MatrixXd m(rows.size(), 2);
    Eigen::Index r = 0;
    for (const auto& row : rows) {
      m(r, 0) = row.at(0).get<double>();
      m(r, 1) = row.at(1).get<double>();
      ++r;
    }
    support.actions[idx] = std::move(m);
  }
  return support;
}

namespace {

json spec_to_json(const NetworkSpec& spec) {
  json j;
  j["input_dim"] = spec.input_dim;
  j["output_dim"] = spec.output_dim;
  j["hidden"] = spec.hidden;
  j["activation"] = spec.activation == Activation::kSiLU ? "silu" : "relu";
  switch (spec.time_embedding) {
    case TimeEmbedding::kNone: j["time_embedding"] = "none"; break;
    case TimeEmbedding::kConcatScalar: j["time_embedding"] = "concat"; break;
    case TimeEmbedding::kSinusoidal: j["time_embedding"] = "sinusoidal"; break;
  }
  j["time_embedding_dim"] = spec.time_embedding_dim;
  j["condition_dim"] = spec.condition_dim;
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.output_dim = j.at("output_dim").get<int>();
  spec.hidden = j.at("hidden").get<std::vector<int>>();
  spec.activation = j.at("activation").get<std::string>() == "relu"
                        ? Activation::kReLU
                        : Activation::kSiLU;
  const std::string te = j.at("time_embedding").get<std::string>();
  spec.time_embedding = te == "none" ? TimeEmbedding::kNone
                        : te == "concat" ? TimeEmbedding::kConcatScalar
                                         : TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = j.at("time_embedding_dim").get<int>();
  spec.condition_dim = j.at("condition_dim").get<int>();
  return spec;
}

json meta_to_json(const CheckpointMeta& meta) {
  json j;
  j["kind"] = meta.kind;
  j["seed"] = meta.seed;
  j["method"] = meta.method;
  j["beta"] = meta.beta;
  j["data_dim"] = meta.data_dim;
  j["condition_dim"] = meta.condition_dim;
  j["num_classes"] = meta.num_classes;
  j["schedule"] = {{"beta0", meta.schedule_beta0},
                   {"beta1", meta.schedule_beta1},
                   {"t_max", meta.schedule_t_max},
                   {"t_min", meta.schedule_t_min}};
  j["config_hash"] = meta.config_hash;
  return j;
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta meta;
  meta.kind = j.at("kind").get<std::string>();
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.method = j.value("method", "");
  meta.beta = j.value("beta", 1.0);
  meta.data_dim = j.value("data_dim", 0);
  meta.condition_dim = j.value("condition_dim", 0);
  meta.num_classes = j.value("num_classes", 0);
  const json& s = j.at("schedule");
  meta.schedule_beta0 = s.at("beta0").get<double>();
  meta.schedule_beta1 = s.at("beta1").get<double>();
  meta.schedule_t_max = s.at("t_max").get<double>();
  meta.schedule_t_min = s.at("t_min").get<double>();
  meta.config_hash = j.value("config_hash", "");
  return meta;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& prefix, const Network& net,
                     const CheckpointMeta& meta) {
  json header = meta_to_json(meta);
  header["spec"] = spec_to_json(net.spec);
  header["param_count"] = net.params.size();
  {
    std::filesystem::path p = prefix;
    open_out(p.concat(".json")) << header.dump(2) << "\n";
  }
  static_assert(std::endian::native == std::endian::little,
                "checkpoint blobs are little-endian");
  std::filesystem::path p = prefix;
  std::ofstream out = open_out(p.concat(".bin"));
  out.write(reinterpret_cast<const char*>(net.params.data()),
            static_cast<std::streamsize>(net.params.size() * sizeof(double)));
}

std::pair<Network, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& prefix) {
  std::filesystem::path pj = prefix;
  json header = json::parse(open_in(pj.concat(".json")));
  Network net;
  net.spec = spec_from_json(header.at("spec"));
  const Eigen::Index n = header.at("param_count").get<Eigen::Index>();
  if (n != static_cast<Eigen::Index>(net.spec.param_count())) {
    throw IoError("checkpoint: param_count does not match spec");
  }
  net.params.resize(n);
  std::filesystem::path pb = prefix;
  std::ifstream in = open_in(pb.concat(".bin"));
  in.read(reinterpret_cast<char*>(net.params.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
    throw IoError("checkpoint: parameter blob truncated");
  }
  return {std::move(net), meta_from_json(header)};
}

void save_prior(const std::filesystem::path& prefix, const PriorModel& model,
                std::uint64_t seed, const std::string& config_hash) {
  CheckpointMeta meta;
  meta.kind = "prior";
  meta.seed = seed;
  meta.data_dim = model.data_dim;
  meta.condition_dim = model.condition_dim;
  meta.schedule_beta0 = model.schedule.beta0();
  meta.schedule_beta1 = model.schedule.beta1();
  meta.schedule_t_max = model.schedule.t_max();
  meta.schedule_t_min = model.schedule.t_min();
  meta.config_hash = config_hash;
  save_checkpoint(prefix, model.net, meta);
}

PriorModel load_prior(const std::filesystem::path& prefix) {
  auto [net, meta] = load_checkpoint(prefix);
  if (meta.kind != "prior") throw IoError("checkpoint is not a prior");
  Schedule schedule(meta.schedule_beta0, meta.schedule_beta1,
                    meta.schedule_t_max, meta.schedule_t_min);
  return PriorModel{std::move(net), schedule, meta.data_dim, meta.condition_dim};
}

void save_guidance(const std::filesystem::path& prefix,
                   const GuidanceModel& model, std::uint64_t seed,
                   const std::string& config_hash) {
  CheckpointMeta meta;
  meta.kind = "guidance";
  meta.seed = seed;
  meta.method = to_string(model.method);
  meta.beta = model.beta;
  meta.num_classes = model.num_classes;
  meta.schedule_beta0 = model.schedule.beta0();
  meta.schedule_beta1 = model.schedule.beta1();
  meta.schedule_t_max = model.schedule.t_max();
  meta.schedule_t_min = model.schedule.t_min();
  meta.config_hash = config_hash;
  if (!model.has_net()) {
    std::filesystem::path p = prefix;
    json header = meta_to_json(meta);
    open_out(p.concat(".json")) << header.dump(2) << "\n";
    return;
  }
  meta.data_dim = model.net.spec.input_dim;
  meta.condition_dim = model.net.spec.condition_dim;
  save_checkpoint(prefix, model.net, meta);
}

GuidanceModel load_guidance(const std::filesystem::path& prefix) {
  std::filesystem::path pj = prefix;
  json header = json::parse(open_in(pj.concat(".json")));
  CheckpointMeta meta = meta_from_json(header);
  if (meta.kind != "guidance") throw IoError("checkpoint is not a guidance model");

  GuidanceModel model;
  model.method = guidance_method_from_string(meta.method);
  model.beta = meta.beta;
  model.num_classes = meta.num_classes;
  model.schedule = Schedule(meta.schedule_beta0, meta.schedule_beta1,
                            meta.schedule_t_max, meta.schedule_t_min);
  if (model.has_net()) {
    auto [net, m2] = load_checkpoint(prefix);
    (void)m2;
    model.net = std::move(net);
  }
  return model;
}

void write_run_metadata(const std::filesystem::path& path,
                        const std::string& config_hash, std::uint64_t seed,
                        const std::vector<std::pair<std::string, std::string>>&
                            extra) {
  json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  for (const auto& [k, v] : extra) j[k] = v;
  const auto now = std::chrono::system_clock::now();
  j["written_at"] = std::chrono::duration_cast<std::chrono::seconds>(
                        now.time_since_epoch())
                        .count();
  open_out(path) << j.dump(2) << "\n";
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace egdiff
