// be-spectral: dataset generation, training, evaluation and spectral reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bes/be_laplacian.hpp"
#include "bes/checkpoint.hpp"
#include "bes/chebyshev.hpp"
#include "bes/error.hpp"
#include "bes/io.hpp"
#include "bes/runner.hpp"
#include "bes/spectral.hpp"
#include "bes/tasks.hpp"
#include "bes/verify.hpp"

namespace fs = std::filesystem;
using namespace bes;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

// --graph FILE or --family NAME --n N [--k K]
struct GraphSource {
  std::string file;
  std::string family;
  std::size_t n = 0;
  std::size_t k = 4;

  void add_to(CLI::App* app) {
    app->add_option("--graph", file, "Edge-list file (0-based 'i j' lines)");
    app->add_option("--family", family, "ring | path | star | complete | barbell (barbell: --n is the total size)");
    app->add_option("--n", n, "Node count for --family");
    app->add_option("--k", k, "Bridge nodes for --family barbell");
  }

  Graph load() const {
    if (!file.empty()) return read_edge_list(file);
    if (family == "ring") return ring_graph(n);
    if (family == "path") return path_graph(n);
    if (family == "star") return star_graph(n);
    if (family == "complete") return complete_graph(n);
    if (family == "barbell") return barbell_graph(barbell_clique_size(n, k), k);
    throw Error(ErrorCode::ConfigInvalid, "give --graph FILE or --family ring|path|star|complete|barbell with --n");
  }
};

// --mu FILE (one value per line) or --mu-const C; default constant 1.
struct MuSource {
  std::string file;
  double constant = 1.0;

  void add_to(CLI::App* app) {
    app->add_option("--mu", file, "Potential, one value per node (CSV column)");
    app->add_option("--mu-const", constant, "Constant potential (default 1)");
  }

  Potential load(std::size_t n) const {
    if (file.empty()) return Potential::constant(n, constant);
    const Matrix m = read_csv(file);
    if (m.cols() != 1 || static_cast<std::size_t>(m.rows()) != n) {
      throw Error(ErrorCode::LengthMismatch, "potential has " + std::to_string(m.rows()) + " rows, graph has " +
                                                 std::to_string(n) + " nodes");
    }
    return Potential(m.col(0));
  }
};

Matrix load_signal(const std::string& file, std::optional<std::size_t> delta, std::size_t n) {
  if (!file.empty()) {
    Matrix s = read_csv(file);
    if (static_cast<std::size_t>(s.rows()) != n) throw Error(ErrorCode::LengthMismatch, "signal rows differ from node count");
    return s;
  }
  if (delta) {
    if (*delta >= n) throw Error(ErrorCode::IndexOutOfRange, "--delta node");
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
    s(static_cast<Eigen::Index>(*delta), 0) = 1.0;
    return s;
  }
  throw Error(ErrorCode::ConfigInvalid, "give --signal FILE or --delta NODE");
}

OperatorKind parse_operator(const std::string& s) {
  if (s == "unnorm") return OperatorKind::Unnormalized;
  if (s == "sym") return OperatorKind::SymNormalized;
  throw Error(ErrorCode::ConfigInvalid, "--operator must be unnorm or sym");
}

fs::path out_dir(const Globals& g, const char* fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

// --out naming a file (with an extension) is used as is; otherwise it is a directory.
fs::path out_file(const Globals& g, const char* name) {
  const fs::path out = out_dir(g, ".");
  return out.has_extension() ? out : out / name;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad number '" + item + "' in list");
    }
  }
  return out;
}

RunConfig load_run_config(const Globals& g) {
  if (g.config.empty()) return RunConfig{};
  try {
    return run_config_from_json(nlohmann::json::parse(read_text(g.config)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, g.config + ": " + e.what());
  }
}

MuChebNet load_model(const std::string& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.meta.contains("model")) throw Error(ErrorCode::ParseError, "checkpoint meta lacks the model config");
  return MuChebNet(model_config_from_json(ck.meta.at("model")), std::move(ck.params));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bakry-Emery spectral graph toolkit and mu-ChebNet experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output directory, or output file for single-file commands");
  app.add_option("--config", g.config, "Run configuration JSON");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  std::string gen_task = "barbell";
  std::size_t gen_n = 50, gen_k = 4, gen_count = 64, gen_nmin = 15, gen_nmax = 25, gen_m = 2;
  std::optional<std::size_t> gen_val, gen_test;
  double gen_p = 0.2, gen_noise = 1.0;
  std::string gen_split = "all", gen_model = "erdos-renyi", gen_features = "bell_offset";
  gen->add_option("--task", gen_task, "barbell | ring | sssp | diameter | eccentricity")->required();
  gen->add_option("--n", gen_n, "Barbell total size or ring length");
  gen->add_option("--k", gen_k, "Barbell bridge nodes");
  gen->add_option("--count", gen_count, "Instances in the train split (or the chosen split)");
  gen->add_option("--val-count", gen_val, "Validation instances (default count/8)");
  gen->add_option("--test-count", gen_test, "Test instances (default count/4)");
  gen->add_option("--split", gen_split, "train | val | test | all");
  gen->add_option("--n-min", gen_nmin, "Property graphs: minimum size");
  gen->add_option("--n-max", gen_nmax, "Property graphs: maximum size");
  gen->add_option("--graph-model", gen_model, "erdos-renyi | barabasi-albert");
  gen->add_option("--p", gen_p, "Erdos-Renyi edge probability");
  gen->add_option("--m", gen_m, "Barabasi-Albert attachments");
  gen->add_option("--noise", gen_noise, "Ring routing noise std / barbell per-node noise std");
  gen->add_option("--features", gen_features, "Barbell features: bell_offset | iid");

  // train
  auto* train = app.add_subcommand("train", "Train over one or more seeds");
  std::string train_seeds;
  std::optional<std::size_t> train_epochs, train_parallel;
  train->add_option("--seeds", train_seeds, "Comma-separated seeds (overrides --seed and the config)");
  train->add_option("--epochs", train_epochs, "Override epochs");
  train->add_option("--parallel-seeds", train_parallel, "Seeds trained concurrently (capped by BE_SPECTRAL_THREADS)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string eval_ckpt, eval_data, eval_split = "test";
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint directory")->required();
  eval->add_option("--data", eval_data, "Dataset directory written by gen")->required();
  eval->add_option("--split", eval_split, "Split to evaluate");

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues of L or L_mu");
  GraphSource spec_graph;
  MuSource spec_mu;
  std::string spec_op = "unnorm";
  bool spec_vectors = false;
  spec_graph.add_to(spectrum);
  spec_mu.add_to(spectrum);
  spectrum->add_option("--operator,--normalized", spec_op, "unnorm | sym");
  spectrum->add_flag("--vectors", spec_vectors, "Also write eigenvectors.csv");

  // diffuse
  auto* diffuse = app.add_subcommand("diffuse", "Heat flow df/dt = -L_mu f");
  GraphSource dif_graph;
  MuSource dif_mu;
  std::string dif_signal, dif_scheme = "spectral";
  std::optional<std::size_t> dif_delta;
  double dif_t = 1.0, dif_dt = 1e-3;
  dif_graph.add_to(diffuse);
  dif_mu.add_to(diffuse);
  diffuse->add_option("--signal", dif_signal, "Initial signal CSV (one column)");
  diffuse->add_option("--delta", dif_delta, "Start from a unit impulse at this node");
  diffuse->add_option("--t", dif_t, "Time horizon");
  diffuse->add_option("--scheme", dif_scheme, "spectral | euler | rk4");
  diffuse->add_option("--dt", dif_dt, "Step for explicit schemes");

  // filter
  auto* filter = app.add_subcommand("filter", "Apply a Chebyshev filter on L_mu");
  GraphSource fil_graph;
  MuSource fil_mu;
  std::string fil_signal, fil_coeffs = "1", fil_op = "unnorm";
  std::optional<std::size_t> fil_delta;
  std::optional<double> fil_lmax;
  fil_graph.add_to(filter);
  fil_mu.add_to(filter);
  std::optional<std::size_t> fil_order;
  filter->add_option("--signal,--X", fil_signal, "Input signal CSV");
  filter->add_option("--delta", fil_delta, "Unit impulse at this node");
  filter->add_option("--coeffs", fil_coeffs, "Scalar coefficients theta_0,...,theta_K, or a CSV file of them");
  filter->add_option("--K", fil_order, "Filter order; must match the coefficient count minus one");
  filter->add_option("--lambda-max", fil_lmax, "Spectral bound (default: power-iteration estimate)");
  filter->add_option("--operator,--normalized", fil_op, "unnorm | sym");

  // verify
  auto* verify = app.add_subcommand("verify", "Run invariant suites");
  std::string ver_suite = "all";
  std::string ver_n;
  std::optional<std::size_t> ver_samples, ver_graphs, ver_points;
  verify->add_option("--suite", ver_suite, "algebra | lemma | corollaries | gradcheck | stability | all");
  verify->add_option("--n", ver_n, "Star sizes for corollaries, comma-separated (default 5,6,10,50)");
  verify->add_option("--samples", ver_samples, "Lemma samples");
  verify->add_option("--graphs", ver_graphs, "Algebra random graphs");
  verify->add_option("--points", ver_points, "Gradcheck parameter points");

  // export-mu
  auto* export_cmd = app.add_subcommand("export-mu", "Write the learned potential of a checkpoint on one instance");
  std::string exp_ckpt, exp_inst;
  export_cmd->add_option("--checkpoint", exp_ckpt, "Checkpoint directory")->required();
  export_cmd->add_option("--instance", exp_inst, "Instance directory written by gen")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      TaskSpec spec;
      spec.data_seed = g.seed;
      spec.size = gen_n;
      spec.k_path = gen_k;
      if (gen_task == "barbell") {
        spec.kind = TaskKind::Barbell;
        if (gen_features != "bell_offset" && gen_features != "iid") {
          throw Error(ErrorCode::ConfigInvalid, "--features must be bell_offset or iid");
        }
        spec.barbell.features = gen_features == "iid" ? BarbellFeatures::Iid : BarbellFeatures::BellOffset;
        spec.barbell.noise_std = gen_noise;
      } else if (gen_task == "ring") {
        spec.kind = TaskKind::RingRouting;
        spec.ring.noise_std = gen_noise;
      } else {
        spec.kind = TaskKind::GraphProperty;
        spec.property.task = property_task_from_string(gen_task);
        spec.property.n_min = gen_nmin;
        spec.property.n_max = gen_nmax;
        spec.property.p = gen_p;
        spec.property.m = gen_m;
        if (gen_model != "erdos-renyi" && gen_model != "barabasi-albert") {
          throw Error(ErrorCode::ConfigInvalid, "--graph-model must be erdos-renyi or barabasi-albert");
        }
        spec.property.model =
            gen_model == "erdos-renyi" ? RandomGraphModel::ErdosRenyi : RandomGraphModel::BarabasiAlbert;
      }
      const fs::path out = out_dir(g, "data");
      const std::vector<std::string> names{"train", "val", "test"};
      const std::size_t counts[3] = {gen_count, gen_val.value_or(std::max<std::size_t>(1, gen_count / 8)),
                                     gen_test.value_or(std::max<std::size_t>(1, gen_count / 4))};
      spec.train = counts[0];
      spec.val = counts[1];
      spec.test = counts[2];
      if (gen_split != "all") spec.train = spec.val = spec.test = gen_count;
      nlohmann::json summary = {{"task", to_json(spec)}, {"splits", nlohmann::json::object()}};
      for (std::size_t s = 0; s < 3; ++s) {
        if (gen_split != "all" && gen_split != names[s]) continue;
        const std::size_t count = gen_split == "all" ? counts[s] : gen_count;
        save_dataset(out, names[s], generate_task(spec, count, derive_seed(spec.data_seed, s)));
        summary["splits"][names[s]] = count;
      }
      if (summary["splits"].empty()) throw Error(ErrorCode::ConfigInvalid, "--split must be train, val, test or all");
      write_text(out / "dataset.json", summary.dump(2) + "\n");
      print_json(summary);
      return 0;
    }

    if (*train) {
      RunConfig cfg = load_run_config(g);
      if (app.get_option("--seed")->count() > 0) cfg.seeds = {g.seed};
      if (!train_seeds.empty()) {
        cfg.seeds.clear();
        for (double s : parse_list(train_seeds)) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      if (!g.out.empty()) cfg.out_dir = g.out;
      if (train_epochs) cfg.epochs = *train_epochs;
      if (train_parallel) cfg.parallel_seeds = *train_parallel;
      const RunRecord rec = cmd_train(cfg);
      const bool regression = rec.metric_name == "mse";
      std::printf("test %s: %.4f +- %.4f over %zu seed(s)", rec.metric_name.c_str(), rec.metric_mean, rec.metric_std,
                  rec.seeds.size());
      if (regression) {
        double lg = 0.0;
        for (const auto& s : rec.seeds) lg += s.test.log10_mse;
        std::printf("  (mean log10 mse %.4f, %s)", lg / static_cast<double>(rec.seeds.size()),
                    to_string(oracle_mse_interpretation(rec.metric_mean)).c_str());
      }
      std::printf("\nconfig hash %s, outputs in %s\n", rec.config_hash.c_str(), cfg.out_dir.string().c_str());
      return 0;
    }

    if (*eval) {
      const MuChebNet model = load_model(eval_ckpt);
      const auto data = load_dataset(eval_data, eval_split);
      const Checkpoint meta = load_checkpoint(eval_ckpt);
      const RunConfig cfg = meta.meta.contains("config") ? run_config_from_json(meta.meta.at("config")) : RunConfig{};
      const EvalResult r = evaluate(model, data, loss_kind(cfg.task));
      nlohmann::json j = to_json(r);
      j["split"] = eval_split;
      j["instances"] = data.size();
      if (!g.out.empty()) write_text(out_file(g, "eval.json"), j.dump(2) + "\n");
      print_json(j);
      return 0;
    }

    if (*spectrum) {
      const Graph graph = spec_graph.load();
      const BEOperator be(graph, spec_mu.load(graph.num_nodes()));
      const SpectralDecomposition d = eig_sym(be_operator(be, parse_operator(spec_op)));
      if (!g.out.empty()) {
        const fs::path out = out_file(g, "spectrum.csv");
        std::string csv = "k,lambda\n";
        char buf[64];
        for (Eigen::Index k = 0; k < d.eigenvalues.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%td,%.17g\n", static_cast<std::ptrdiff_t>(k), d.eigenvalues[k]);
          csv += buf;
        }
        write_text(out, csv);
        if (spec_vectors) write_csv(out.parent_path() / "eigenvectors.csv", d.eigenvectors);
      }
      print_json({{"num_nodes", graph.num_nodes()},
                  {"num_edges", graph.num_edges()},
                  {"operator", spec_op},
                  {"eigenvalues", std::vector<double>(d.eigenvalues.begin(), d.eigenvalues.end())}});
      return 0;
    }

    if (*diffuse) {
      const Graph graph = dif_graph.load();
      const BEOperator be(graph, dif_mu.load(graph.num_nodes()));
      const Matrix f0 = load_signal(dif_signal, dif_delta, graph.num_nodes());
      HeatOptions opts;
      opts.dt = dif_dt;
      if (dif_scheme == "spectral") {
        opts.scheme = HeatScheme::Spectral;
      } else if (dif_scheme == "euler") {
        opts.scheme = HeatScheme::Euler;
      } else if (dif_scheme == "rk4") {
        opts.scheme = HeatScheme::RK4;
      } else {
        throw Error(ErrorCode::ConfigInvalid, "--scheme must be spectral, euler or rk4");
      }
      Matrix ft(f0.rows(), f0.cols());
      for (Eigen::Index c = 0; c < f0.cols(); ++c) ft.col(c) = heat_flow(be, f0.col(c), dif_t, opts);
      const fs::path out = out_file(g, "heat.csv");
      write_csv(out, ft);
      print_json({{"t", dif_t}, {"scheme", dif_scheme}, {"mass_before", f0.sum()}, {"mass_after", ft.sum()},
                  {"output", out.string()}});
      return 0;
    }

    if (*filter) {
      const Graph graph = fil_graph.load();
      const BEOperator be(graph, fil_mu.load(graph.num_nodes()));
      const OperatorKind kind = parse_operator(fil_op);
      const Matrix x = load_signal(fil_signal, fil_delta, graph.num_nodes());
      const double lmax = fil_lmax ? *fil_lmax : estimate_lambda_max(be_operator(be, kind));
      std::vector<double> theta;
      if (fs::is_regular_file(fil_coeffs)) {
        const Matrix c = read_csv(fil_coeffs);
        theta.assign(c.data(), c.data() + c.size());
      } else {
        theta = parse_list(fil_coeffs);
      }
      if (fil_order && *fil_order + 1 != theta.size()) {
        throw Error(ErrorCode::ShapeMismatch, "--K " + std::to_string(*fil_order) + " needs " +
                                                  std::to_string(*fil_order + 1) + " coefficients, got " +
                                                  std::to_string(theta.size()));
      }
      const ChebFilter f = ChebFilter::scalar(lmax, theta);
      const Matrix y = cheb_apply_be(f, be, x, kind);
      const fs::path out = out_file(g, "filtered.csv");
      write_csv(out, y);
      print_json({{"order", f.order}, {"lambda_max", lmax}, {"output", out.string()}});
      return 0;
    }

    if (*verify) {
      VerifyOptions opts;
      opts.seed = g.seed;
      if (!ver_n.empty()) {
        opts.star_sizes.clear();
        for (double v : parse_list(ver_n)) opts.star_sizes.push_back(static_cast<std::size_t>(v));
      }
      if (ver_samples) opts.samples = *ver_samples;
      if (ver_graphs) opts.graphs = *ver_graphs;
      if (ver_points) opts.points = *ver_points;
      std::vector<std::string> suites = ver_suite == "all" ? suite_names() : std::vector<std::string>{ver_suite};
      nlohmann::json report = nlohmann::json::array();
      bool ok = true;
      for (const auto& name : suites) {
        const SuiteReport r = run_suite(name, opts);
        ok = ok && r.passed();
        report.push_back(r.to_json());
        for (const auto& c : r.checks) {
          std::printf("[%s] %-8s %s  value=%.3g%s\n", name.c_str(),
                      c.asserted ? (c.passed ? "PASS" : "FAIL") : "REPORT", c.name.c_str(), c.value,
                      c.detail.empty() ? "" : ("  " + c.detail).c_str());
        }
      }
      const fs::path out = out_file(g, "report.json");
      write_text(out, report.dump(2) + "\n");
      std::printf("%s; report written to %s\n", ok ? "all suites passed" : "FAILURES", out.c_str());
      return ok ? 0 : 1;
    }

    if (*export_cmd) {
      const MuChebNet model = load_model(exp_ckpt);
      const TaskInstance inst = load_instance(exp_inst);
      const MuExport ex = export_mu(model, inst);
      const fs::path out = out_dir(g, ".");
      write_csv(out / "mu.csv", ex.mu);
      write_text(out / "manifest.json", ex.manifest.dump(2) + "\n");
      print_json(ex.manifest.at("stats"));
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "be-spectral: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "be-spectral: %s\n", e.what());
    return 2;
  }
  return 0;
}
