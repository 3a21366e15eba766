#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "q2t/dataset_io.hpp"
#include "q2t/encoder_checkpoint.hpp"
#include "q2t/error.hpp"
#include "q2t/graph_encoding.hpp"
#include "q2t/kg_store.hpp"
#include "q2t/link_predictor.hpp"
#include "q2t/query_graphormer.hpp"
#include "q2t/symbolic_engine.hpp"
#include "q2t/synthetic.hpp"
#include "q2t/trainer_eval.hpp"
#include "report_render.hpp"
#include "run_config.hpp"

#ifndef Q2T_VERSION_STRING
#define Q2T_VERSION_STRING "unknown"
#endif

namespace fs = std::filesystem;
using namespace q2t;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitErrorBase = 10;

int exit_code(ErrorKind kind) { return kExitErrorBase + static_cast<int>(kind); }

struct Common {
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::string seed;
  std::string device;
  std::string out;
};

struct Paths {
  std::string kg, input, queries, kge, encoder, split, axis, values, query;
  std::vector<std::string> inputs;
  std::size_t top_k = 0;
  bool synthetic = false;
  bool dump_buckets = false;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write {}", path.string()));
}

class Session {
 public:
  Session(std::string command, const Common& common) : command_(std::move(command)) {
    config_ = cli::RunConfig::defaults();
    for (const auto& f : common.config_files) config_.merge_file(require(f));
    for (const auto& o : common.overrides) config_.apply_override(o);
    if (!common.seed.empty()) config_.set("seed", common.seed);
    if (!common.device.empty()) config_.set("device", common.device);
    if (config_.get("device") != "cpu") {
      throw Error(ErrorKind::kConfig,
                  fmt::format("device '{}' is not available; only cpu is supported", config_.get("device")));
    }
    config_.seed();
    if (!common.out.empty()) {
      out_ = common.out;
      fs::create_directories(*out_);
      write_text(*out_ / "effective_config.txt", config_.effective_text(Q2T_VERSION_STRING, command_));
      write_text(*out_ / "version.txt", std::string(Q2T_VERSION_STRING) + "\n");
    }
  }

  const cli::RunConfig& config() const { return config_; }
  bool has_out() const { return out_.has_value(); }

  const fs::path& out() const {
    if (!out_) throw Error(ErrorKind::kConfig, fmt::format("{} requires --out", command_));
    return *out_;
  }

  // Relative paths that do not exist are looked up under data.dir, then
  // $Q2T_DATA_DIR.
  fs::path require(const fs::path& path) const {
    if (fs::exists(path)) return path;
    if (path.is_relative()) {
      for (const auto& root : data_roots()) {
        if (fs::exists(root / path)) return root / path;
      }
    }
    throw Error(ErrorKind::kIo, fmt::format("missing file or directory: {}", path.string()));
  }

 private:
  std::vector<fs::path> data_roots() const {
    std::vector<fs::path> roots;
    if (config_.values().contains("data.dir") && !config_.get("data.dir").empty()) {
      roots.emplace_back(config_.get("data.dir"));
    }
    if (const char* env = std::getenv("Q2T_DATA_DIR"); env && *env) roots.emplace_back(env);
    return roots;
  }

  std::string command_;
  cli::RunConfig config_;
  std::optional<fs::path> out_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_lp(std::string_view label, const kge::LinkPredictionMetrics& m, std::string& out) {
  const auto line = fmt::format("{} mrr={:.4f} hits1={:.4f} hits3={:.4f} hits10={:.4f} count={}\n",
                                label, m.mrr, m.hits1, m.hits3, m.hits10, m.count);
  fmt::print("{}", line);
  out += line;
}

// --- subcommands -----------------------------------------------------------

int run_ingest(const Session& s, const Paths& p) {
  if (p.synthetic == !p.input.empty()) {
    throw Error(ErrorKind::kConfig, "ingest needs exactly one of --input or --synthetic");
  }
  const auto family = p.synthetic ? kg::make_synthetic_family(s.config().synthetic())
                                  : kg::load_split_family(s.require(p.input));
  kg::save_split_family(family, s.out());
  fmt::print("entities={} relations={} train={} valid={} test={} full={}\n",
             family.full.num_entities(), family.full.num_relations(), family.train.size(),
             family.valid_edges.size(), family.test_edges.size(), family.full.size());
  return 0;
}

int run_sample(const Session& s, const Paths& p) {
  const auto family = kg::load_split_family(s.require(p.kg));
  const auto splits = symbolic::generate_dataset(family, s.config().generation_counts(),
                                                 s.config().seed(), s.config().sampler());
  symbolic::write_splits(splits, s.out());
  std::string stats;
  for (const auto& [name, ds] : {std::pair{"train", &splits.train}, std::pair{"valid", &splits.valid},
                                 std::pair{"test", &splits.test}}) {
    stats += fmt::format("[{}] records={}\n{}", name, ds->records.size(),
                         symbolic::format_answer_stats(*ds));
  }
  write_text(s.out() / "answer_stats.txt", stats);
  fmt::print("{}", stats);
  return 0;
}

int run_pretrain(const Session& s, const Paths& p) {
  const auto family = kg::load_split_family(s.require(p.kg));
  const auto config = s.config().pretrain();
  const auto log_every = std::max<std::size_t>(1, s.config().get_size("pretrain.log_every"));
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = kge::pretrain(family.train, config, [&](std::size_t epoch, double loss) {
    if ((epoch + 1) % log_every == 0 || epoch + 1 == config.epochs) {
      fmt::print("epoch {} loss {:.6f}\n", epoch + 1, loss);
    }
  });
  kge::save_checkpoint(result.model, s.out() / "kge");

  std::string log = "epoch,loss\n";
  for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
    log += fmt::format("{},{}\n", i + 1, format_double(result.epoch_losses[i]));
  }
  write_text(s.out() / "pretrain_log.csv", log);

  std::string metrics;
  const auto train_index = kg::build_index(family.train);
  print_lp("train", kge::eval_link_prediction(result.model, train_index, family.train.triples()),
           metrics);
  const auto full_index = kg::build_index(family.full);
  if (!family.valid_edges.empty()) {
    print_lp("valid", kge::eval_link_prediction(result.model, full_index, family.valid_edges.triples()),
             metrics);
  }
  if (!family.test_edges.empty()) {
    print_lp("test", kge::eval_link_prediction(result.model, full_index, family.test_edges.triples()),
             metrics);
  }
  write_text(s.out() / "link_prediction.txt", metrics);
  fmt::print("pretrained in {:.1f}s, hash {}\n", seconds_since(t0), kge::content_hash(result.model));
  return 0;
}

symbolic::DatasetSplits load_queries(const Session& s, const std::string& dir) {
  return symbolic::read_splits(s.require(dir));
}

int run_train(const Session& s, const Paths& p) {
  const auto splits = load_queries(s, p.queries);
  if (splits.train.records.empty()) throw Error(ErrorKind::kIo, "no training queries in " + p.queries);
  const auto kge = kge::load_checkpoint(s.require(p.kge));
  const auto enc = s.config().encoder();
  const auto run = s.config().train();
  const auto log_every = std::max<std::size_t>(1, s.config().get_size("train.log_every"));

  std::string log = "step,loss,valid_ap\n";
  const auto t0 = std::chrono::steady_clock::now();
  auto result = trainer::train_encoder(splits.train, splits.valid, kge, enc, run,
                                       [&](const trainer::TrainLogEntry& e) {
    log += fmt::format("{},{},{}\n", e.step, format_double(e.loss),
                       e.valid_ap ? format_double(*e.valid_ap) : "");
    if (e.step % log_every == 0 || e.valid_ap) {
      fmt::print("step {} loss {:.6f}{}\n", e.step, e.loss,
                 e.valid_ap ? fmt::format(" valid A_p {:.4f}", *e.valid_ap) : "");
    }
  });
  write_text(s.out() / "train_log.csv", log);

  std::string kge_hash = kge::content_hash(kge);
  if (result.tuned_kge) {
    result.tuned_kge->round_to_storage();
    kge::save_checkpoint(*result.tuned_kge, s.out() / "kge");
    kge_hash = kge::content_hash(*result.tuned_kge);
  }
  graphormer::round_to_storage(result.params);
  graphormer::save_encoder({enc, result.params, kge.width(), kge_hash}, s.out() / "encoder");
  fmt::print("trained {} steps in {:.1f}s", run.max_steps, seconds_since(t0));
  if (result.best_valid_ap) fmt::print(", best valid A_p {:.4f} at step {}", *result.best_valid_ap, result.best_step);
  fmt::print("\n");
  return 0;
}

const symbolic::SampledDataset& pick_split(const symbolic::DatasetSplits& splits, std::string_view name) {
  if (name == "train") return splits.train;
  if (name == "valid") return splits.valid;
  if (name == "test") return splits.test;
  throw Error(ErrorKind::kConfig, fmt::format("unknown split '{}'", name));
}

int run_eval(const Session& s, const Paths& p) {
  const auto splits = load_queries(s, p.queries);
  const auto kge = kge::load_checkpoint(s.require(p.kge));
  const auto ckpt = graphormer::load_encoder(s.require(p.encoder), kge::content_hash(kge));
  const std::string split = p.split.empty() ? s.config().get("eval.split") : p.split;
  const auto& dataset = pick_split(splits, split);
  if (dataset.records.empty()) throw Error(ErrorKind::kNoRows, fmt::format("split '{}' has no queries", split));

  const auto& target_name = s.config().get("eval.target");
  trainer::AnswerTarget target;
  if (target_name == "auto") {
    target = split == "train" ? trainer::AnswerTarget::kEasy : trainer::AnswerTarget::kHard;
  } else if (target_name == "hard") {
    target = trainer::AnswerTarget::kHard;
  } else if (target_name == "easy") {
    target = trainer::AnswerTarget::kEasy;
  } else {
    throw Error(ErrorKind::kConfig, fmt::format("unknown eval.target '{}'", target_name));
  }

  const auto report = trainer::evaluate(dataset, kge, ckpt.params, ckpt.config, target);
  write_text(s.out() / "eval.csv", trainer::report_csv(report));
  const std::pair<std::string, trainer::EvalReport> row{fs::path(p.encoder).parent_path().filename().string(), report};
  const auto table = trainer::format_report_table(std::span(&row, 1));
  write_text(s.out() / "table.txt", table);
  fmt::print("{}evaluated {} queries on {} ({} skipped) in {:.1f}s\n", table, dataset.records.size(), split,
             report.skipped, report.runtime_seconds);
  return 0;
}

int run_answer(const Session& s, const Paths& p) {
  const auto kge = kge::load_checkpoint(s.require(p.kge));
  const auto ckpt = graphormer::load_encoder(s.require(p.encoder), kge::content_hash(kge));
  const auto query = query::parse_nested(p.query);
  const auto scored = graphormer::score_query(query, kge, ckpt.params, ckpt.config);

  std::vector<std::string> names;
  if (!p.kg.empty()) {
    names = kg::load_name_map(s.require(p.kg) / "entity2id.txt");
    if (names.size() != kge.num_entities()) {
      throw Error(ErrorKind::kShape, fmt::format("entity map has {} names, model has {} entities",
                                                 names.size(), kge.num_entities()));
    }
  }
  const std::size_t k = std::min<std::size_t>(
      p.top_k ? p.top_k : s.config().get_size("answer.top_k"), kge.num_entities());
  std::vector<kg::EntityId> order(kge.num_entities());
  std::iota(order.begin(), order.end(), kg::EntityId{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](kg::EntityId a, kg::EntityId b) {
                      return scored.scores[a] != scored.scores[b] ? scored.scores[a] > scored.scores[b] : a < b;
                    });

  if (p.dump_buckets) {
    for (std::size_t c = 0; c < query.conjuncts.size(); ++c) {
      const auto seq = encoding::encode_graph(query.conjuncts[c], ckpt.config.encoding);
      fmt::print("buckets conjunct {} ({} buckets)\n{}", c, seq.num_buckets, encoding::format_bucket_matrix(seq));
    }
  }
  std::string out = fmt::format("query\t{}\t{}\nrank\tentity\tname\tscore\n", query::serialize_nested(query),
                                query::query_type_name(query.type));
  for (std::size_t i = 0; i < k; ++i) {
    const auto e = order[i];
    out += fmt::format("{}\t{}\t{}\t{:.6f}\n", i + 1, e, names.empty() ? fmt::format("e{}", e) : names[e],
                       scored.scores[e]);
  }
  fmt::print("{}", out);
  if (s.has_out()) write_text(s.out() / "answers.tsv", out);
  return 0;
}

int run_sweep(const Session& s, const Paths& p) {
  const auto splits = load_queries(s, p.queries);
  const auto kge = kge::load_checkpoint(s.require(p.kge));
  const auto axis = trainer::parse_sweep_axis(p.axis.empty() ? s.config().get("sweep.axis") : p.axis);
  const auto values = cli::parse_value_list(p.values.empty() ? s.config().get("sweep.values") : p.values);
  const trainer::SweepData data{&splits.train, &splits.valid, &splits.test, &kge};
  const auto rows = trainer::sweep(axis, values, data, s.config().encoder(), s.config().train());
  const auto csv = trainer::sweep_csv(axis, rows);
  write_text(s.out() / "sweep.csv", csv);
  fmt::print("{}", csv);
  return 0;
}

int run_report(const Session& s, const Paths& p) {
  std::vector<std::pair<std::string, trainer::EvalReport>> evals;
  for (const auto& input : p.inputs) {
    const auto path = s.require(input);
    const auto text = read_text(path);
    const auto kind = cli::detect_csv_kind(text, path.string());
    auto name = path.stem().string();
    if ((name == "eval" || name == "sweep") && path.has_parent_path()) {
      name = path.parent_path().filename().string();
    }
    if (kind == cli::CsvKind::kEval) {
      evals.emplace_back(name, trainer::parse_report_csv(text));
    } else {
      const auto series = cli::parse_sweep_csv(text, path.string());
      const auto file = s.out() / (name + ".svg");
      write_text(file, cli::render_sweep_svg(series, name));
      fmt::print("wrote {}\n", file.string());
    }
  }
  if (!evals.empty()) {
    const auto table = trainer::format_report_table(evals);
    write_text(s.out() / "table.txt", table);
    fmt::print("{}", table);
  }
  return 0;
}

void print_error(std::string_view kind, int code, std::string_view message) {
  std::string flat(message);
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::cerr << fmt::format("q2t: error kind={} exit={} message={}\n", kind, code, flat);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex query answering workbench", "q2t"};
  app.set_version_flag("--version", std::string(Q2T_VERSION_STRING));
  app.require_subcommand(1);

  Common common;
  Paths paths;
  std::string command;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_files, "key=value config file (repeatable)");
    sub->add_option("--set", common.overrides, "override one key, key=value (repeatable)");
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--device", common.device, "compute device (cpu)");
    sub->add_option("--out", common.out, "output directory");
  };

  auto* ingest = app.add_subcommand("ingest", "load or generate a KG split family");
  ingest->add_option("--input", paths.input, "directory with train/valid/test.txt and id maps");
  ingest->add_flag("--synthetic", paths.synthetic, "generate a random KG from synthetic.*");

  auto* sample = app.add_subcommand("sample", "sample train/valid/test queries");
  sample->add_option("--kg", paths.kg, "KG directory")->required();

  auto* pretrain = app.add_subcommand("pretrain", "train the link predictor");
  pretrain->add_option("--kg", paths.kg, "KG directory")->required();

  auto* train = app.add_subcommand("train", "train the query encoder");
  train->add_option("--queries", paths.queries, "query directory")->required();
  train->add_option("--kge", paths.kge, "link predictor checkpoint")->required();

  auto* eval = app.add_subcommand("eval", "evaluate an encoder checkpoint");
  eval->add_option("--queries", paths.queries, "query directory")->required();
  eval->add_option("--kge", paths.kge, "link predictor checkpoint")->required();
  eval->add_option("--encoder", paths.encoder, "encoder checkpoint")->required();
  eval->add_option("--split", paths.split, "train, valid or test");

  auto* answer = app.add_subcommand("answer", "rank entities for one nested-tuple query");
  answer->add_option("query", paths.query, "query, e.g. \"(7,(3,))\"")->required();
  answer->add_option("--kge", paths.kge, "link predictor checkpoint")->required();
  answer->add_option("--encoder", paths.encoder, "encoder checkpoint")->required();
  answer->add_option("--kg", paths.kg, "KG directory for entity names");
  answer->add_option("--top-k", paths.top_k, "number of entities to print");
  answer->add_flag("--dump-buckets", paths.dump_buckets, "print the attention-bias bucket matrix");

  auto* sweep = app.add_subcommand("sweep", "train and evaluate across one hyperparameter");
  sweep->add_option("--queries", paths.queries, "query directory")->required();
  sweep->add_option("--kge", paths.kge, "link predictor checkpoint")->required();
  sweep->add_option("--axis", paths.axis, "label_smoothing or num_layers");
  sweep->add_option("--values", paths.values, "comma-separated values");

  auto* report = app.add_subcommand("report", "render eval CSVs as a table and sweep CSVs as plots");
  report->add_option("inputs", paths.inputs, "CSV files")->required();

  for (auto* sub : {ingest, sample, pretrain, train, eval, answer, sweep, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", kExitUsage, e.what());
    return kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  command = sub->get_name();
  try {
    const Session session(command, common);
    if (command != "answer") session.out();
    if (command == "ingest") return run_ingest(session, paths);
    if (command == "sample") return run_sample(session, paths);
    if (command == "pretrain") return run_pretrain(session, paths);
    if (command == "train") return run_train(session, paths);
    if (command == "eval") return run_eval(session, paths);
    if (command == "answer") return run_answer(session, paths);
    if (command == "sweep") return run_sweep(session, paths);
    return run_report(session, paths);
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    print_error(error_kind_name(e.kind()), code, e.what());
    return code;
  } catch (const fs::filesystem_error& e) {
    const int code = exit_code(ErrorKind::kIo);
    print_error(error_kind_name(ErrorKind::kIo), code, e.what());
    return code;
  } catch (const std::exception& e) {
    print_error("internal", kExitInternal, e.what());
    return kExitInternal;
  }
}
