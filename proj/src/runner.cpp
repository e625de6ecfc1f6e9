#include "bes/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "bes/checkpoint.hpp"
#include "bes/error.hpp"
#include "bes/io.hpp"

namespace bes {

namespace {

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Barbell: return "barbell";
    case TaskKind::GraphProperty: return "graph_property";
    case TaskKind::RingRouting: return "ring_routing";
  }
  return "barbell";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "barbell") return TaskKind::Barbell;
  if (s == "graph_property") return TaskKind::GraphProperty;
  if (s == "ring_routing") return TaskKind::RingRouting;
  throw Error(ErrorCode::ConfigInvalid, "unknown task kind '" + s + "'");
}

struct StackedBatch {
  Batch batch;
  Matrix target;
  Vector mask;
};

StackedBatch stack(const std::vector<TaskInstance>& data, std::span<const std::size_t> idx) {
  std::vector<Graph> graphs;
  std::vector<Matrix> feats;
  Eigen::Index rows = 0;
  for (std::size_t i : idx) {
    graphs.push_back(data[i].graph);
    feats.push_back(data[i].x);
    rows += data[i].y.rows();
  }
  StackedBatch s;
  s.batch = make_batch(graphs, feats);
  s.target.resize(rows, data[idx.front()].y.cols());
  s.mask.resize(rows);
  Eigen::Index r = 0;
  for (std::size_t i : idx) {
    const auto len = data[i].y.rows();
    s.target.middleRows(r, len) = data[i].y;
    s.mask.segment(r, len) = data[i].mask;
    r += len;
  }
  return s;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- configuration -------------------------------------------------------------

nlohmann::json to_json(const TaskSpec& t) {
  nlohmann::json j = {
      {"kind", to_string(t.kind)},
      {"size", t.size},
      {"k_path", t.k_path},
      {"barbell",
       {{"features", t.barbell.features == BarbellFeatures::Iid ? "iid" : "bell_offset"},
        {"offset_std", t.barbell.offset_std},
        {"noise_std", t.barbell.noise_std}}},
      {"property",
       {{"task", to_string(t.property.task)},
        {"n_min", t.property.n_min},
        {"n_max", t.property.n_max},
        {"model", t.property.model == RandomGraphModel::ErdosRenyi ? "erdos-renyi" : "barabasi-albert"},
        {"p", t.property.p},
        {"m", t.property.m},
        {"max_retries", t.property.max_retries}}},
      {"ring", {{"num_classes", t.ring.num_classes}, {"noise_std", t.ring.noise_std}}},
      {"train", t.train},
      {"val", t.val},
      {"test", t.test},
      {"data_seed", t.data_seed},
  };
  if (t.data_dir) j["data_dir"] = t.data_dir->string();
  return j;
}

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"task", to_json(c.task)},
      {"model", to_json(c.model)},
      {"optim",
       {{"lr", c.optim.lr},
        {"beta1", c.optim.beta1},
        {"beta2", c.optim.beta2},
        {"eps", c.optim.eps},
        {"weight_decay", c.optim.weight_decay}}},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"patience", c.patience},
      {"eval_every", c.eval_every},
      {"seeds", c.seeds},
      {"out_dir", c.out_dir.string()},
      {"parallel_seeds", c.parallel_seeds},
      {"save_checkpoints", c.save_checkpoints},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("task")) {
      const auto& t = j.at("task");
      c.task.kind = task_kind_from_string(t.value("kind", std::string("barbell")));
      c.task.size = t.value("size", c.task.size);
      c.task.k_path = t.value("k_path", c.task.k_path);
      if (t.contains("barbell")) {
        const auto& b = t.at("barbell");
        const std::string f = b.value("features", std::string("bell_offset"));
        if (f != "iid" && f != "bell_offset") throw Error(ErrorCode::ConfigInvalid, "barbell.features must be iid or bell_offset");
        c.task.barbell.features = f == "iid" ? BarbellFeatures::Iid : BarbellFeatures::BellOffset;
        c.task.barbell.offset_std = b.value("offset_std", c.task.barbell.offset_std);
        c.task.barbell.noise_std = b.value("noise_std", c.task.barbell.noise_std);
      }
      if (t.contains("property")) {
        const auto& p = t.at("property");
        c.task.property.task = property_task_from_string(p.value("task", std::string("sssp")));
        c.task.property.n_min = p.value("n_min", c.task.property.n_min);
        c.task.property.n_max = p.value("n_max", c.task.property.n_max);
        const std::string model = p.value("model", std::string("erdos-renyi"));
        if (model != "erdos-renyi" && model != "barabasi-albert") {
          throw Error(ErrorCode::ConfigInvalid, "property.model must be erdos-renyi or barabasi-albert");
        }
        c.task.property.model = model == "erdos-renyi" ? RandomGraphModel::ErdosRenyi : RandomGraphModel::BarabasiAlbert;
        c.task.property.p = p.value("p", c.task.property.p);
        c.task.property.m = p.value("m", c.task.property.m);
        c.task.property.max_retries = p.value("max_retries", c.task.property.max_retries);
      }
      if (t.contains("ring")) {
        c.task.ring.num_classes = t.at("ring").value("num_classes", c.task.ring.num_classes);
        c.task.ring.noise_std = t.at("ring").value("noise_std", c.task.ring.noise_std);
      }
      c.task.train = t.value("train", c.task.train);
      c.task.val = t.value("val", c.task.val);
      c.task.test = t.value("test", c.task.test);
      c.task.data_seed = t.value("data_seed", c.task.data_seed);
      if (t.contains("data_dir")) c.task.data_dir = t.at("data_dir").get<std::string>();
    }
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("optim")) {
      const auto& o = j.at("optim");
      c.optim.lr = o.value("lr", c.optim.lr);
      c.optim.beta1 = o.value("beta1", c.optim.beta1);
      c.optim.beta2 = o.value("beta2", c.optim.beta2);
      c.optim.eps = o.value("eps", c.optim.eps);
      c.optim.weight_decay = o.value("weight_decay", c.optim.weight_decay);
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.eval_every = j.value("eval_every", c.eval_every);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.out_dir = j.value("out_dir", c.out_dir.string());
    c.parallel_seeds = j.value("parallel_seeds", c.parallel_seeds);
    c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  if (c.batch_size == 0 || c.eval_every == 0 || c.seeds.empty() || c.parallel_seeds == 0) {
    throw Error(ErrorCode::ConfigInvalid, "batch_size, eval_every, parallel_seeds and seeds must be non-empty/positive");
  }
  if (!(c.optim.lr > 0.0)) throw Error(ErrorCode::ConfigInvalid, "optim.lr must be > 0");
  return c;
}

std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- data ------------------------------------------------------------------------

std::vector<TaskInstance> generate_task(const TaskSpec& spec, std::size_t count, std::uint64_t seed) {
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    switch (spec.kind) {
      case TaskKind::Barbell:
        out.push_back(gen_barbell(barbell_clique_size(spec.size, spec.k_path), spec.k_path, s, spec.barbell));
        break;
      case TaskKind::GraphProperty: out.push_back(gen_graph_property(spec.property, s)); break;
      case TaskKind::RingRouting: out.push_back(gen_ring_routing(spec.size, s, spec.ring)); break;
    }
  }
  return out;
}

DataSplits make_splits(const TaskSpec& spec) {
  DataSplits d;
  if (spec.data_dir) {
    d.train = load_dataset(*spec.data_dir, "train");
    d.val = load_dataset(*spec.data_dir, "val");
    d.test = load_dataset(*spec.data_dir, "test");
    return d;
  }
  d.train = generate_task(spec, spec.train, derive_seed(spec.data_seed, 0));
  d.val = generate_task(spec, spec.val, derive_seed(spec.data_seed, 1));
  d.test = generate_task(spec, spec.test, derive_seed(spec.data_seed, 2));
  return d;
}

LossKind loss_kind(const TaskSpec& spec) {
  return spec.kind == TaskKind::RingRouting ? LossKind::CrossEntropy : LossKind::Mse;
}

ModelConfig fit_model_to_task(ModelConfig model, const TaskSpec& spec, const TaskInstance& sample) {
  model.in_dim = static_cast<std::size_t>(sample.x.cols());
  model.out_dim = spec.kind == TaskKind::RingRouting ? spec.ring.num_classes : static_cast<std::size_t>(sample.y.cols());
  model.readout = sample.graph_level ? Readout::Graph : Readout::Node;
  model.validate();
  return model;
}

// ---- evaluation ------------------------------------------------------------------

EvalResult evaluate(const MuChebNet& model, const std::vector<TaskInstance>& data, LossKind kind,
                    std::size_t batch_size) {
  EvalResult r;
  r.classification = kind == LossKind::CrossEntropy;
  if (data.empty()) return r;
  double sq = 0.0, ce = 0.0;
  std::size_t correct = 0;
  const auto idx = iota_indices(data.size());
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(batch_size, idx.size() - start));
    const StackedBatch s = stack(data, chunk);
    const Matrix pred = model.predict(s.batch);
    if (pred.rows() != s.target.rows()) throw Error(ErrorCode::ShapeMismatch, "prediction rows differ from targets");
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      if (s.mask[i] == 0.0) continue;
      ++r.supervised;
      if (kind == LossKind::CrossEntropy) {
        const auto label = static_cast<Eigen::Index>(std::lround(s.target(i, 0)));
        const double mx = pred.row(i).maxCoeff();
        const double lse = mx + std::log((pred.row(i).array() - mx).exp().sum());
        ce += lse - pred(i, label);
        Eigen::Index arg = 0;
        pred.row(i).maxCoeff(&arg);
        if (arg == label) ++correct;
      } else {
        sq += (pred.row(i) - s.target.row(i)).squaredNorm() / static_cast<double>(pred.cols());
      }
    }
  }
  if (r.supervised == 0) throw Error(ErrorCode::EmptyMask, "no supervised entries in evaluation set");
  const double count = static_cast<double>(r.supervised);
  if (kind == LossKind::CrossEntropy) {
    r.loss = ce / count;
    r.accuracy = static_cast<double>(correct) / count;
  } else {
    r.mse = sq / count;
    r.loss = r.mse;
    r.log10_mse = std::log10(r.mse);
  }
  return r;
}

// ---- training ----------------------------------------------------------------------

SeedResult train_seed(const RunConfig& config, const DataSplits& data, std::uint64_t seed, std::ostream* metrics,
                      const std::filesystem::path& checkpoint_dir) {
  if (data.train.empty() || data.val.empty() || data.test.empty()) {
    throw Error(ErrorCode::DatasetMissing, "train, val and test splits must be non-empty");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const LossKind kind = loss_kind(config.task);
  const ModelConfig mc = fit_model_to_task(config.model, config.task, data.train.front());
  MuChebNet model(mc, derive_seed(seed, 0));
  std::mt19937_64 shuffle_rng(derive_seed(seed, 1));

  SeedResult res;
  res.seed = seed;
  res.untrained_test = evaluate(model, data.test, kind, config.batch_size);
  EvalResult best_val = evaluate(model, data.val, kind, config.batch_size);
  ad::ParameterSet best = model.params();
  AdamState adam;

  auto idx = iota_indices(data.train.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), shuffle_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
      const std::span<const std::size_t> chunk(idx.data() + start, std::min(config.batch_size, idx.size() - start));
      const StackedBatch s = stack(data.train, chunk);
      ad::Tape tape;
      const auto leaves = model.params().bind(tape);
      const ForwardResult fr = model.forward(tape, leaves, s.batch);
      const ad::Var l = loss(kind, fr.prediction, s.target, s.mask);
      const double value = l.scalar();
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NaNLoss, "seed " + std::to_string(seed) + ", epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(batches) + ": training loss is " +
                                            fmt_double(value));
      }
      const ad::Gradients g = tape.backward(l);
      std::vector<Matrix> grads;
      grads.reserve(leaves.size());
      for (const auto& leaf : leaves) grads.push_back(g.of(leaf));
      adam_step(model.params(), grads, adam, config.optim);
      total += value;
      ++batches;
    }
    res.epochs_run = epoch;
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = total / static_cast<double>(batches);
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      const EvalResult val = evaluate(model, data.val, kind, config.batch_size);
      em.val_loss = val.loss;
      em.val_metric = kind == LossKind::CrossEntropy ? val.accuracy : val.mse;
      if (val.loss < best_val.loss) {
        best_val = val;
        best = model.params();
        res.best_epoch = epoch;
      }
      res.history.push_back(em);
      if (metrics) {
        nlohmann::json line = {{"seed", seed},
                               {"epoch", epoch},
                               {"train_loss", em.train_loss},
                               {"val_loss", em.val_loss},
                               {"val_metric", em.val_metric}};
        *metrics << line.dump() << '\n';
        metrics->flush();
      }
      if (epoch - res.best_epoch >= config.patience) break;
    }
  }

  model.params() = best;
  res.test = config.epochs == 0 ? res.untrained_test : evaluate(model, data.test, kind, config.batch_size);

  if (config.task.kind == TaskKind::RingRouting || config.task.kind == TaskKind::Barbell) {
    std::vector<double> a, b;
    for (const auto& inst : data.test) {
      const auto m = export_mu(model, inst).manifest.at("stats");
      if (config.task.kind == TaskKind::RingRouting) {
        a.push_back(m.at("mean_clean").get<double>());
        b.push_back(m.at("mean_noisy").get<double>());
      } else {
        a.push_back(m.at("mean_bridge").get<double>());
        b.push_back(m.at("mean_bell").get<double>());
      }
    }
    if (config.task.kind == TaskKind::RingRouting) {
      res.extras["mean_mu_clean"] = mean_of(a);
      res.extras["mean_mu_noisy"] = mean_of(b);
    } else {
      res.extras["mean_mu_bridge"] = mean_of(a);
      res.extras["mean_mu_bell"] = mean_of(b);
    }
  }

  if (!checkpoint_dir.empty()) {
    save_checkpoint(checkpoint_dir, model.params(),
                    {{"config", to_json(config)}, {"model", to_json(mc)}, {"seed", seed},
                     {"config_hash", config_hash(config)}, {"best_epoch", res.best_epoch}});
    res.checkpoint = checkpoint_dir;
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::size_t thread_cap() {
  if (const char* env = std::getenv("BE_SPECTRAL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

RunRecord cmd_train(const RunConfig& config) { return cmd_train(config, make_splits(config.task)); }

RunRecord cmd_train(const RunConfig& config, const DataSplits& data) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const nlohmann::json cfg = to_json(config);
  write_text(config.out_dir / "config.json", cfg.dump(2) + "\n");

  RunRecord rec;
  rec.config_hash = config_hash(config);
  rec.seeds.resize(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());

  auto run_one = [&](std::size_t i) {
    try {
      const std::uint64_t seed = config.seeds[i];
      const fs::path dir = config.out_dir / ("seed_" + std::to_string(seed));
      fs::create_directories(dir);
      std::ofstream metrics(dir / "metrics.jsonl");
      rec.seeds[i] = train_seed(config, data, seed, &metrics, config.save_checkpoints ? dir / "checkpoint" : fs::path{});
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::min({config.parallel_seeds, thread_cap(), config.seeds.size()});
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.seeds.size(); i = next++) run_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const bool classify = loss_kind(config.task) == LossKind::CrossEntropy;
  rec.metric_name = classify ? "accuracy" : "mse";
  std::vector<double> metric;
  for (const auto& s : rec.seeds) metric.push_back(classify ? s.test.accuracy : s.test.mse);
  rec.metric_mean = mean_of(metric);
  rec.metric_std = pop_std(metric);

  write_text(config.out_dir / "record.json", to_json(rec).dump(2) + "\n");
  std::ofstream csv(config.out_dir / "summary.csv");
  csv << "seed,test_" << rec.metric_name << (classify ? "" : ",test_log10_mse") << ",untrained_test_"
      << rec.metric_name << ",best_epoch,epochs_run\n";
  for (const auto& s : rec.seeds) {
    csv << s.seed << ',' << fmt_double(classify ? s.test.accuracy : s.test.mse);
    if (!classify) csv << ',' << fmt_double(s.test.log10_mse);
    csv << ',' << fmt_double(classify ? s.untrained_test.accuracy : s.untrained_test.mse) << ',' << s.best_epoch << ','
        << s.epochs_run << '\n';
  }
  const std::string blanks = classify ? ",,," : ",,,,";
  csv << "mean," << fmt_double(rec.metric_mean) << blanks << '\n';
  csv << "std," << fmt_double(rec.metric_std) << blanks << '\n';
  return rec;
}

// ---- records -----------------------------------------------------------------------

nlohmann::json to_json(const EvalResult& r) {
  if (r.classification) return {{"loss", r.loss}, {"accuracy", r.accuracy}, {"supervised", r.supervised}};
  return {{"loss", r.loss}, {"mse", r.mse}, {"log10_mse", r.log10_mse}, {"supervised", r.supervised}};
}

nlohmann::json to_json(const SeedResult& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.history) {
    history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss},
                       {"val_metric", h.val_metric}});
  }
  return {{"seed", r.seed},
          {"untrained_test", to_json(r.untrained_test)},
          {"test", to_json(r.test)},
          {"best_epoch", r.best_epoch},
          {"epochs_run", r.epochs_run},
          {"wall_seconds", r.wall_seconds},
          {"checkpoint", r.checkpoint.string()},
          {"extras", r.extras},
          {"history", history}};
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) seeds.push_back(to_json(s));
  return {{"config_hash", r.config_hash}, {"metric", r.metric_name}, {"mean", r.metric_mean}, {"std", r.metric_std},
          {"seeds", seeds}};
}

// ---- potential export ----------------------------------------------------------

MuExport export_mu(const MuChebNet& model, const TaskInstance& inst) {
  if (static_cast<std::size_t>(inst.x.cols()) != model.config().in_dim) {
    throw Error(ErrorCode::ShapeMismatch, "instance has " + std::to_string(inst.x.cols()) +
                                              " feature channels, checkpoint expects " +
                                              std::to_string(model.config().in_dim));
  }
  const std::vector<Graph> graphs{inst.graph};
  const std::vector<Matrix> feats{inst.x};
  const Batch batch = make_batch(graphs, feats);
  MuExport out;
  out.mu = model.potential_values(batch);
  const auto n = static_cast<std::size_t>(out.mu.size());

  std::vector<std::string> roles(n, "node");
  nlohmann::json stats = {{"mean", out.mu.mean()}, {"min", out.mu.minCoeff()}, {"max", out.mu.maxCoeff()}};
  const std::string task = inst.meta.value("task", std::string());
  if (task == "ring_routing") {
    const auto clean = inst.meta.at("clean_path").get<std::vector<std::size_t>>();
    const auto noisy = inst.meta.at("noisy_path").get<std::vector<std::size_t>>();
    double mc = 0.0, mn = 0.0;
    for (std::size_t v : clean) {
      mc += out.mu[static_cast<Eigen::Index>(v)];
      roles[v] = "clean_path";
    }
    for (std::size_t v : noisy) {
      mn += out.mu[static_cast<Eigen::Index>(v)];
      roles[v] = "noisy_path";
    }
    mc /= static_cast<double>(clean.size());
    mn /= static_cast<double>(noisy.size());
    roles[inst.meta.at("query").get<std::size_t>()] = "query";
    roles[inst.meta.at("answer").get<std::size_t>()] = "answer";
    stats["mean_clean"] = mc;
    stats["mean_noisy"] = mn;
    stats["path_contrast"] = mc - mn;
  } else if (task == "barbell") {
    roles = inst.meta.at("roles").get<std::vector<std::string>>();
    double bell = 0.0, bridge = 0.0;
    std::size_t nb = 0, nr = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (roles[i] == "bridge") {
        bridge += out.mu[static_cast<Eigen::Index>(i)];
        ++nr;
      } else {
        bell += out.mu[static_cast<Eigen::Index>(i)];
        ++nb;
      }
    }
    stats["mean_bell"] = nb ? bell / static_cast<double>(nb) : 0.0;
    stats["mean_bridge"] = nr ? bridge / static_cast<double>(nr) : 0.0;
  }
  out.manifest = {{"num_nodes", n}, {"order", "node id ascending"}, {"roles", roles}, {"stats", stats},
                  {"task", task}};
  return out;
}

}  // namespace bes
