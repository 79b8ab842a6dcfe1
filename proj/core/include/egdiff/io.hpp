#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "egdiff/bench2d.hpp"
#include "egdiff/guidance.hpp"
#include "egdiff/net.hpp"
#include "egdiff/prior.hpp"
#include "egdiff/qgpo.hpp"

namespace egdiff {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dataset CSV: header x1,x2[,energy][,label], one row per point.
void write_dataset_csv(const std::filesystem::path& path, const Dataset2D& ds);
Dataset2D read_dataset_csv(const std::filesystem::path& path);

/// Sample CSV: header x1..xd, one row per sample.
void write_samples_csv(const std::filesystem::path& path,
                       const Eigen::MatrixXd& samples);
Eigen::MatrixXd read_samples_csv(const std::filesystem::path& path);

/// Transition CSV: header s1,s2,a1,a2,r,s1n,s2n,done. Consecutive rows whose
/// s matches the previous row's s' share a state entry on read.
void write_transitions_csv(const std::filesystem::path& path,
                           const TransitionDataset& ds);
TransitionDataset read_transitions_csv(const std::filesystem::path& path);

/// Support set JSON: {"k": K, "actions": {"<state index>": [[a1,a2], ...]}}.
void write_support_json(const std::filesystem::path& path,
                        const SupportActionSet& support);
SupportActionSet read_support_json(const std::filesystem::path& path);

/// Checkpoints are a JSON header `<prefix>.json` describing the spec, seed
/// and metadata, plus `<prefix>.bin` holding the parameters as consecutive
/// little-endian IEEE-754 float64 values in layer order (weights row-major,
/// then biases).
struct CheckpointMeta {
  std::string kind;      // "prior" | "guidance"
  std::uint64_t seed = 0;
  std::string method;    // guidance only
  double beta = 1.0;
  int data_dim = 0;
  int condition_dim = 0;
  int num_classes = 0;
  double schedule_beta0 = 0.1;
  double schedule_beta1 = 20.0;
  double schedule_t_max = 1.0;
  double schedule_t_min = 1e-3;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& prefix, const Network& net,
                     const CheckpointMeta& meta);
std::pair<Network, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& prefix);

void save_prior(const std::filesystem::path& prefix, const PriorModel& model,
                std::uint64_t seed, const std::string& config_hash);
PriorModel load_prior(const std::filesystem::path& prefix);

void save_guidance(const std::filesystem::path& prefix,
                   const GuidanceModel& model, std::uint64_t seed,
                   const std::string& config_hash);
/// Loads a trained guidance model; kDps/kNone checkpoints are headers only.
GuidanceModel load_guidance(const std::filesystem::path& prefix);

/// Run metadata sidecar; `written_at` is the only non-deterministic field.
void write_run_metadata(const std::filesystem::path& path,
                        const std::string& config_hash, std::uint64_t seed,
                        const std::vector<std::pair<std::string, std::string>>&
                            extra = {});

/// FNV-1a 64-bit hash, hex-encoded; used as the config fingerprint.
std::string fnv1a_hex(const std::string& text);

}  // namespace egdiff
