#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "egdiff/bench2d.hpp"
#include "egdiff/io.hpp"
#include "test_helpers.hpp"

using namespace egdiff;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "egdiff_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("dataset csv round trip") {
  const auto dir = temp_dir();
  Dataset2D ds = make_dataset("8gaussians", 200, 3);
  attach_energy(ds, builtin_energy("linear"));

  write_dataset_csv(dir / "ds.csv", ds);
  const Dataset2D back = read_dataset_csv(dir / "ds.csv");
  CHECK(back.size() == ds.size());
  CHECK((back.points - ds.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.energies - ds.energies).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.labels == ds.labels);

  // plain points only
  Dataset2D plain;
  plain.points = ds.points.topRows(10);
  write_dataset_csv(dir / "plain.csv", plain);
  const Dataset2D p = read_dataset_csv(dir / "plain.csv");
  CHECK(!p.has_energies());
  CHECK(!p.has_labels());

  std::ofstream(dir / "bad.csv") << "x1,zz\n1,2\n";
  CHECK_THROWS_AS(read_dataset_csv(dir / "bad.csv"), IoError);
  CHECK_THROWS_AS(read_dataset_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("samples csv round trip") {
  const auto dir = temp_dir();
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd m = egdiff::test::random_matrix(37, 2, rng);
  write_samples_csv(dir / "samples.csv", m);
  const Eigen::MatrixXd back = read_samples_csv(dir / "samples.csv");
  CHECK(back == m);
}

TEST_CASE("transitions csv round trip preserves shared states") {
  const auto dir = temp_dir();
  PointGoalEnv env;
  const TransitionDataset ds = generate_behavior_dataset(env, 8, 0.5, 7);
  write_transitions_csv(dir / "transitions.csv", ds);
  const TransitionDataset back = read_transitions_csv(dir / "transitions.csv");

  REQUIRE(back.size() == ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    const Transition a = ds.transition(i);
    const Transition b = back.transition(i);
    CHECK((a.s - b.s).norm() == 0.0);
    CHECK((a.a - b.a).norm() == 0.0);
    CHECK(a.r == b.r);
    CHECK((a.s_next - b.s_next).norm() == 0.0);
    CHECK(a.done == b.done);
  }
  // consecutive-step sharing reconstructed: same state table size
  CHECK(back.states.rows() == ds.states.rows());
}

TEST_CASE("support set json round trip") {
  const auto dir = temp_dir();
  std::mt19937_64 rng(9);
  SupportActionSet support;
  for (int i = 0; i < 5; ++i) {
    support.actions.push_back(egdiff::test::random_matrix(3, 2, rng));
  }
  write_support_json(dir / "support.json", support);
  const SupportActionSet back = read_support_json(dir / "support.json");
  REQUIRE(back.actions.size() == 5);
  CHECK(back.k() == 3);
  for (int i = 0; i < 5; ++i) {
    CHECK((back.actions[i] - support.actions[i]).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = temp_dir();
  NetworkSpec spec;
  spec.input_dim = 2;
  spec.output_dim = 1;
  spec.hidden = {8, 4};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  spec.time_embedding_dim = 8;
  spec.condition_dim = 3;
  const Network net = init_network(spec, 11);

  CheckpointMeta meta;
  meta.kind = "guidance";
  meta.seed = 11;
  meta.method = "CEP";
  meta.beta = 2.5;
  save_checkpoint(dir / "ckpt", net, meta);

  const auto [back, back_meta] = load_checkpoint(dir / "ckpt");
  CHECK(back.params == net.params);
  CHECK(back.spec.hidden == spec.hidden);
  CHECK(back.spec.condition_dim == 3);
  CHECK(back_meta.method == "CEP");
  CHECK(back_meta.beta == 2.5);

  // truncated blob is rejected
  std::filesystem::resize_file(dir / "ckpt.bin", 16);
  CHECK_THROWS_AS(load_checkpoint(dir / "ckpt"), IoError);
}

TEST_CASE("prior and guidance model round trips") {
  const auto dir = temp_dir();
  const Schedule sched(0.2, 18.0, 1.0, 2e-3);

  NetworkSpec spec;
  spec.input_dim = 2;
  spec.output_dim = 2;
  spec.hidden = {8};
  spec.time_embedding = TimeEmbedding::kSinusoidal;
  const PriorModel prior{init_network(spec, 13), sched, 2, 0};
  save_prior(dir / "prior", prior, 13, "deadbeef");
  const PriorModel pback = load_prior(dir / "prior");
  CHECK(pback.net.params == prior.net.params);
  CHECK(pback.schedule.beta0() == 0.2);
  CHECK(pback.data_dim == 2);

  GuidanceModel guidance;
  guidance.method = GuidanceMethod::kCepSelfNorm;
  guidance.beta = 4.0;
  guidance.schedule = sched;
  NetworkSpec gs;
  gs.input_dim = 2;
  gs.output_dim = 1;
  gs.hidden = {8};
  gs.time_embedding = TimeEmbedding::kSinusoidal;
  guidance.net = init_network(gs, 17);
  save_guidance(dir / "guidance", guidance, 17, "deadbeef");
  const GuidanceModel gback = load_guidance(dir / "guidance");
  CHECK(gback.method == GuidanceMethod::kCepSelfNorm);
  CHECK(gback.beta == 4.0);
  CHECK(gback.net.params == guidance.net.params);

  // training-free methods persist as headers only
  GuidanceModel dps;
  dps.method = GuidanceMethod::kDps;
  dps.beta = 10.0;
  dps.schedule = sched;
  save_guidance(dir / "dps", dps, 0, "");
  const GuidanceModel dback = load_guidance(dir / "dps");
  CHECK(dback.method == GuidanceMethod::kDps);
  CHECK(dback.beta == 10.0);
  CHECK(!std::filesystem::exists(dir / "dps.bin"));
}

TEST_CASE("fnv1a fingerprints are stable") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == fnv1a_hex("a"));
  CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
}
