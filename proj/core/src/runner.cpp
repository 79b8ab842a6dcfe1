#include "egdiff/runner.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "egdiff/bench2d.hpp"
#include "egdiff/io.hpp"
#include "egdiff/oracle.hpp"
#include "egdiff/qgpo.hpp"
#include "egdiff/sampler.hpp"

namespace egdiff {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
}

Dataset2D load_or_make_dataset(const RunConfig& cfg) {
  return make_dataset(cfg.dataset, cfg.data_n, cfg.seed);
}

EnergySpec config_energy(const RunConfig& cfg, double beta) {
  return builtin_energy(cfg.energy_name, beta);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void run_train_prior(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const Dataset2D ds = load_or_make_dataset(cfg);
  TrainingLog log;
  const PriorModel prior = train_prior(ds.points, {}, cfg.network_spec(),
                                       cfg.schedule, cfg.prior_train, cfg.seed,
                                       &log);
  save_prior(out_dir / "prior", prior, cfg.seed, cfg.config_hash);
  write_run_metadata(out_dir / "prior_run.json", cfg.config_hash, cfg.seed,
                     {{"kind", "prior"},
                      {"dataset", cfg.dataset},
                      {"final_loss",
                       log.loss_curve.empty()
                           ? "nan"
                           : format_double(log.loss_curve.back())}});
}

void run_train_guidance(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const Dataset2D ds = load_or_make_dataset(cfg);
  const GuidanceMethod method = guidance_method_from_string(cfg.guidance_method);
  TrainingLog log;
  GuidanceModel model;
  if (method == GuidanceMethod::kCepCond || method == GuidanceMethod::kClassifier) {
    if (!ds.has_labels()) {
      throw ConfigError("dataset '" + cfg.dataset +
                        "' has no labels for conditional guidance");
    }
    model = train_conditional_guidance(method, ds.points, ds.labels,
                                       dataset_class_count(cfg.dataset),
                                       cfg.network_spec(), cfg.schedule,
                                       cfg.guidance_train, cfg.seed, &log);
  } else {
    const EnergySpec energy = config_energy(cfg, cfg.beta);
    model = train_guidance(method, ds.points, energy, cfg.network_spec(),
                           cfg.schedule, cfg.guidance_train, cfg.seed, &log);
  }
  save_guidance(out_dir / "guidance", model, cfg.seed, cfg.config_hash);
  write_run_metadata(out_dir / "guidance_run.json", cfg.config_hash, cfg.seed,
                     {{"kind", "guidance"},
                      {"method", cfg.guidance_method},
                      {"exp_clamps", std::to_string(log.exp_clamps)}});
}

void run_sample(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  if (cfg.prior_checkpoint.empty()) {
    throw ConfigError("sample runs need io.prior_checkpoint");
  }
  const PriorModel prior = load_prior(cfg.prior_checkpoint);
  GuidanceModel guidance;  // defaults to no guidance
  if (!cfg.guidance_checkpoint.empty()) {
    guidance = load_guidance(cfg.guidance_checkpoint);
    if (guidance.method == GuidanceMethod::kDps) {
      guidance.energy = config_energy(cfg, guidance.beta);
    }
  }
  const Eigen::MatrixXd samples = sample(prior, guidance, cfg.sampler,
                                         cfg.n_samples);
  write_samples_csv(out_dir / "samples.csv", samples);
  write_run_metadata(out_dir / "samples_run.json", cfg.config_hash, cfg.seed,
                     {{"kind", "sample"},
                      {"method", to_string(guidance.method)},
                      {"n_samples", std::to_string(cfg.n_samples)}});
}

std::vector<Compare2dRow> run_compare2d(const RunConfig& cfg,
                                        const fs::path& out_dir) {
  ensure_dir(out_dir);
  const Dataset2D ds = load_or_make_dataset(cfg);

  std::cout << "[compare2d] training prior on " << cfg.dataset << " ("
            << ds.size() << " points)\n";
  const PriorModel prior = train_prior(ds.points, {}, cfg.network_spec(),
                                       cfg.schedule, cfg.prior_train, cfg.seed);

  std::vector<Compare2dRow> rows;
  for (double beta : cfg.betas) {
    const EnergySpec energy = config_energy(cfg, beta);
    const Eigen::MatrixXd truth =
        resample_ground_truth(ds.points, energy, cfg.n_samples, cfg.seed + 1);
    const double bw = median_heuristic_bandwidth(truth, truth);

    for (const std::string& method_name : cfg.methods) {
      const GuidanceMethod method = guidance_method_from_string(method_name);
      GuidanceModel guidance;
      if (method == GuidanceMethod::kDps) {
        guidance.method = GuidanceMethod::kDps;
        guidance.beta = beta;
        guidance.schedule = cfg.schedule;
        guidance.energy = energy;
      } else if (method != GuidanceMethod::kNone) {
        std::cout << "[compare2d] training " << method_name
                  << " guidance at beta=" << beta << "\n";
        guidance = train_guidance(method, ds.points, energy, cfg.network_spec(),
                                  cfg.schedule, cfg.guidance_train, cfg.seed);
      }
      const Eigen::MatrixXd samples =
          sample(prior, guidance, cfg.sampler, cfg.n_samples);

      Compare2dRow row;
      row.beta = beta;
      row.method = method_name;
      row.mmd2 = mmd2(samples, truth, bw);
      row.hist_tv = hist_divergence(samples, truth);
      row.mean_energy = mean_energy(samples, energy);
      row.n_samples = cfg.n_samples;
      rows.push_back(row);

      std::ostringstream name;
      name << "samples_beta" << beta << "_" << method_name << ".csv";
      write_samples_csv(out_dir / name.str(), samples);
      std::cout << "[compare2d] beta=" << beta << " method=" << method_name
                << " mmd2=" << row.mmd2 << " hist_tv=" << row.hist_tv
                << " mean_energy=" << row.mean_energy << "\n";
    }
  }

  std::ofstream table(out_dir / "compare2d.csv");
  table << "beta,method,mmd2,hist_tv,mean_energy,n_samples\n";
  for (const Compare2dRow& row : rows) {
    table << format_double(row.beta) << "," << row.method << ","
          << format_double(row.mmd2) << "," << format_double(row.hist_tv) << ","
          << format_double(row.mean_energy) << "," << row.n_samples << "\n";
  }
  write_run_metadata(out_dir / "compare2d_run.json", cfg.config_hash, cfg.seed,
                     {{"kind", "compare2d"}, {"dataset", cfg.dataset}});
  return rows;
}

QgpoReport run_qgpo(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const QgpoOptions& opt = cfg.qgpo;
  PointGoalEnv env;
  env.discount = opt.gamma;

  std::cout << "[qgpo] generating behavior dataset (" << opt.episodes
            << " episodes, mix=" << opt.mix << ")\n";
  const TransitionDataset dataset =
      generate_behavior_dataset(env, opt.episodes, opt.mix, cfg.seed);
  write_transitions_csv(out_dir / "transitions.csv", dataset);

  std::cout << "[qgpo] phase 1/3: training the behavior model\n";
  PriorTrainOptions behavior_opts;
  behavior_opts.steps = opt.behavior_steps;
  behavior_opts.batch_size = opt.behavior_batch;
  behavior_opts.learning_rate = opt.behavior_lr;
  const PriorModel behavior = train_behavior_policy(
      dataset, cfg.network_spec(), cfg.schedule, behavior_opts, cfg.seed);
  save_prior(out_dir / "behavior", behavior, cfg.seed, cfg.config_hash);

  std::cout << "[qgpo] phase 2/3: generating the support action set (K="
            << opt.k << ")\n";
  SamplerConfig support_cfg;
  support_cfg.steps = opt.support_sampler_steps;
  support_cfg.seed = cfg.seed + 1;
  const SupportActionSet support =
      generate_support_actions(behavior, dataset.states, opt.k, support_cfg);
  write_support_json(out_dir / "support.json", support);

  std::cout << "[qgpo] phase 3/3: training the action evaluation model and "
               "the energy model\n";
  QTrainOptions q_opts;
  q_opts.steps = opt.q_steps;
  q_opts.batch_size = opt.q_batch;
  q_opts.learning_rate = opt.q_lr;
  q_opts.tau = opt.tau;
  q_opts.gamma = opt.gamma;
  q_opts.beta_q = opt.beta_q;
  q_opts.double_q = opt.double_q;
  q_opts.hidden = cfg.hidden;
  const QModel q = train_q(dataset, support, q_opts, cfg.seed + 2);

  QgpoGuidanceTrainOptions g_opts;
  g_opts.steps = opt.guidance_steps;
  g_opts.learning_rate = opt.guidance_lr;
  g_opts.states_per_step = opt.guidance_states_per_step;
  g_opts.beta = opt.beta;
  g_opts.hidden = cfg.hidden;
  const GuidanceModel guidance =
      train_qgpo_guidance(dataset, support, q, cfg.schedule, g_opts, cfg.seed + 3);
  save_guidance(out_dir / "qgpo_guidance", guidance, cfg.seed, cfg.config_hash);

  QgpoReport report;
  bool have_zero = false;
  for (double s : opt.scales) {
    if (s == 0.0) have_zero = true;
  }
  std::vector<double> scales = opt.scales;
  if (!have_zero) scales.insert(scales.begin(), 0.0);

  json sweep = json::array();
  for (double s : scales) {
    const PolicyEvalResult eval = evaluate_policy(
        env, behavior, guidance, s, opt.eval_episodes, cfg.seed + 100,
        opt.eval_sampler_steps);
    std::cout << "[qgpo] s=" << s << " return=" << eval.mean_return << " +- "
              << eval.std_error << "\n";
    report.returns_by_scale.emplace_back(s, eval.mean_return);
    report.std_errors.push_back(eval.std_error);
    if (s == 0.0) report.behavior_return = eval.mean_return;
    if (report.returns_by_scale.size() == 1 ||
        eval.mean_return > report.best_return) {
      report.best_return = eval.mean_return;
      report.best_scale = s;
    }
    sweep.push_back({{"scale", s},
                     {"mean_return", eval.mean_return},
                     {"std_return", eval.std_return},
                     {"std_error", eval.std_error},
                     {"episodes", eval.episodes}});
  }

  json doc;
  doc["config_hash"] = cfg.config_hash;
  doc["seed"] = cfg.seed;
  doc["seeds"] = {{"dataset", cfg.seed},
                  {"behavior", cfg.seed},
                  {"support", cfg.seed + 1},
                  {"q", cfg.seed + 2},
                  {"guidance", cfg.seed + 3},
                  {"evaluation", cfg.seed + 100}};
  doc["behavior_return"] = report.behavior_return;
  doc["best_scale"] = report.best_scale;
  doc["best_return"] = report.best_return;
  doc["sweep"] = std::move(sweep);
  std::ofstream(out_dir / "qgpo_report.json") << doc.dump(2) << "\n";
  write_run_metadata(out_dir / "qgpo_run.json", cfg.config_hash, cfg.seed,
                     {{"kind", "qgpo"}});
  return report;
}

void run_oracle_grid(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const Dataset2D ds = load_or_make_dataset(cfg);
  const EnergySpec energy = config_energy(cfg, cfg.beta);
  const EmpiricalOracle oracle(EmpiricalPrior{ds.points}, energy, cfg.schedule);

  GuidanceModel guidance;
  const bool with_model = !cfg.guidance_checkpoint.empty();
  if (with_model) guidance = load_guidance(cfg.guidance_checkpoint);

  std::ofstream out(out_dir / "oracle_grid.csv");
  out << "x1,x2,t,energy,grad1,grad2";
  if (with_model) out << ",f_phi";
  out << "\n";

  const OracleGridOptions& g = cfg.oracle_grid;
  for (double t : g.times) {
    for (int i = 0; i < g.grid_n; ++i) {
      for (int j = 0; j < g.grid_n; ++j) {
        Eigen::Vector2d x;
        x[0] = g.grid_n == 1 ? g.lo
                             : g.lo + (g.hi - g.lo) * i / (g.grid_n - 1);
        x[1] = g.grid_n == 1 ? g.lo
                             : g.lo + (g.hi - g.lo) * j / (g.grid_n - 1);
        const double e = oracle.posterior_energy(x, t);
        const Eigen::VectorXd grad = oracle.posterior_guidance(x, t);
        out << format_double(x[0]) << "," << format_double(x[1]) << ","
            << format_double(t) << "," << format_double(e) << ","
            << format_double(grad[0]) << "," << format_double(grad[1]);
        if (with_model) {
          const Eigen::VectorXd f = forward(guidance.net, x, t);
          out << "," << format_double(f[0]);
        }
        out << "\n";
      }
    }
  }
  write_run_metadata(out_dir / "oracle_grid_run.json", cfg.config_hash,
                     cfg.seed, {{"kind", "oracle-grid"}});
}

}  // namespace egdiff
