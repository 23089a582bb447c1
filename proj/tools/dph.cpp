// Command-line front end: data generation, training, indexing, querying,
// evaluation, and the four-way data ablation. Every run is pinned by the
// seeds in its flags/config, so identical invocations rewrite identical
// outputs.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dph/dph.hpp"

namespace {

// Applies a flat `key = value` config file by appending the pairs as flags,
// skipping any key the command line already sets, so explicit flags always
// win. Runs before CLI11 sees the arguments.
std::vector<std::string> with_config_defaults(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size();) {
    std::string found;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw dph::ConfigError("--config needs a file path");
      found = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
    } else if (args[i].starts_with("--config=")) {
      found = args[i].substr(9);
      args.erase(args.begin() + i);
    } else {
      ++i;
      continue;
    }
    if (!config_path.empty()) throw dph::ConfigError("--config given more than once");
    config_path = found;
  }
  if (config_path.empty()) return args;

  std::set<std::string> given;
  for (const std::string& a : args) {
    if (a.starts_with("--")) given.insert(a.substr(0, a.find('=')));
  }
  std::ifstream in(config_path);
  if (!in) throw dph::IoError("cannot open config file '" + config_path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = dph::detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto pos = view.find('=');
    if (pos == std::string_view::npos) {
      throw dph::ParseError(config_path + ": line " + std::to_string(lineno) +
                            ": expected key = value");
    }
    const std::string key(dph::detail::trim(view.substr(0, pos)));
    const std::string value(dph::detail::trim(view.substr(pos + 1)));
    if (key.empty()) {
      throw dph::ParseError(config_path + ": line " + std::to_string(lineno) +
                            ": empty key");
    }
    const std::string flag = "--" + key;
    if (given.contains(flag)) continue;
    args.push_back(flag);
    args.push_back(value);
  }
  return args;
}

std::array<double, 4> parse_fractions(const std::string& text) {
  const auto parts = dph::detail::split(text, ',');
  if (parts.size() != 4) {
    throw dph::ConfigError("--fractions needs 4 comma-separated values (both,category,attribute,test)");
  }
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = dph::parse_double(parts[i], "--fractions");
  return out;
}

std::vector<int> parse_hidden_dims(const std::string& text) {
  std::vector<int> dims;
  if (text.empty() || text == "none") return dims;
  for (const auto part : dph::detail::split(text, ',')) {
    dims.push_back(static_cast<int>(dph::parse_u64(part, "--hidden")));
  }
  return dims;
}

dph::AttrClause parse_clause(const std::string& text) {
  const auto pos = text.find('=');
  if (pos == std::string::npos) {
    throw dph::QueryError("clause must look like <attribute>=<0|1>, got '" + text + "'");
  }
  dph::AttrClause clause;
  clause.attribute = static_cast<int>(dph::parse_u64(text.substr(0, pos), "--clause"));
  clause.desired = static_cast<int>(dph::parse_u64(text.substr(pos + 1), "--clause"));
  return clause;
}

void check_model_matches(const dph::DphModel& model, const dph::Dataset& ds) {
  if (model.config.input_dim != ds.feature_dim ||
      model.config.num_categories != ds.num_categories ||
      model.config.num_attributes != ds.num_attributes) {
    throw dph::ConfigError("checkpoint (d=" + std::to_string(model.config.input_dim) +
                           ", C=" + std::to_string(model.config.num_categories) +
                           ", m=" + std::to_string(model.config.num_attributes) +
                           ") does not match dataset (d=" + std::to_string(ds.feature_dim) +
                           ", C=" + std::to_string(ds.num_categories) +
                           ", m=" + std::to_string(ds.num_attributes) + ")");
  }
}

std::vector<dph::Sample> select_split(const dph::Dataset& ds, const std::string& split) {
  if (split == "all") return ds.samples;
  if (split == "test") return dph::test_samples(ds);
  if (split == "both" || split == "category" || split == "attribute") {
    const auto mode = split == "both"       ? dph::AblationMode::both_only
                      : split == "category" ? dph::AblationMode::both_category
                                            : dph::AblationMode::both_attribute;
    // both_category/both_attribute pools include train_both; strip it when a
    // single group was asked for.
    if (split == "both") {
      return dph::apply_ablation_mask(ds.samples, ds.partition, mode);
    }
    const auto index = dph::detail::id_index(ds.samples);
    const auto& ids = split == "category" ? ds.partition.train_category
                                          : ds.partition.train_attribute;
    std::vector<dph::Sample> out;
    out.reserve(ids.size());
    for (const std::uint64_t id : ids) out.push_back(ds.samples[index.at(id)]);
    return out;
  }
  throw dph::ConfigError("unknown --split '" + split +
                         "' (expected all, both, category, attribute, or test)");
}

void print_ranked(const dph::RankedResult& result, int top) {
  const std::size_t n = std::min<std::size_t>(top, result.size());
  for (std::size_t r = 0; r < n; ++r) {
    std::cout << (r + 1) << '\t' << result[r].id << '\t'
              << dph::format_double(result[r].score) << '\n';
  }
}

dph::BinaryCode parse_code(const std::string& text, int k) {
  if (static_cast<int>(text.size()) != k) {
    throw dph::QueryError("--code needs exactly " + std::to_string(k) +
                          " bits, got " + std::to_string(text.size()));
  }
  dph::BinaryCode code(k);
  for (int i = 0; i < k; ++i) {
    if (text[i] == '1') {
      code.set_bit(i);
    } else if (text[i] != '0') {
      throw dph::QueryError("--code must be a string of 0s and 1s");
    }
  }
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-purpose hashing: binary codes that serve category, attribute, and combined retrieval"};
  app.require_subcommand(1);
  std::string config_note;

  // gen-data -----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic partially-labelled dataset");
  gen->add_option("--config", config_note,
                  "flat key = value config file; explicit flags win");
  dph::SynthConfig synth;
  std::string gen_out, fractions_text = "0.15,0.55,0.15,0.15";
  gen->add_option("--categories", synth.num_categories, "number of categories");
  gen->add_option("--dim", synth.feature_dim, "feature dimension");
  gen->add_option("--attrs", synth.num_attributes, "number of attributes");
  gen->add_option("--per-category", synth.samples_per_category, "samples per category");
  gen->add_option("--spread", synth.cluster_spread, "cluster noise scale");
  gen->add_option("--noise", synth.attribute_noise_rate, "attribute label flip rate");
  gen->add_option("--fractions", fractions_text, "both,category,attribute,test fractions");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--out", gen_out, "dataset output path")->required();
  gen->callback([&] {
    synth.partition_fractions = parse_fractions(fractions_text);
    const dph::Dataset ds = dph::generate_synthetic(synth);
    dph::save_dataset(ds, gen_out);
    std::cout << "wrote " << ds.samples.size() << " samples to " << gen_out
              << " (+ " << dph::partition_path_for(gen_out) << ")\n";
  });

  // train ----------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train a model on an ablation pool");
  tr->add_option("--config", config_note,
                  "flat key = value config file; explicit flags win");
  std::string tr_data, tr_out, tr_log, tr_mode = "B+A+C", tr_hidden = "64";
  int tr_bits = 32;
  dph::TrainConfig train_cfg;
  tr->add_option("--data", tr_data, "dataset path")->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--mode", tr_mode, "training pool: B, B+A, B+C, or B+A+C");
  tr->add_option("--bits", tr_bits, "code length k");
  tr->add_option("--hidden", tr_hidden, "hidden layer sizes, comma separated ('none' for none)");
  tr->add_option("--alpha", train_cfg.alpha, "attribute loss weight");
  tr->add_option("--batch", train_cfg.batch_size, "mini-batch size");
  tr->add_option("--lr", train_cfg.learning_rate, "learning rate for code and head layers");
  tr->add_option("--lr-preceding-mult", train_cfg.lr_multiplier_pretrained,
                 "learning-rate multiplier for the hidden stack");
  tr->add_option("--momentum", train_cfg.momentum, "SGD momentum");
  tr->add_option("--weight-decay", train_cfg.weight_decay, "L2 weight decay");
  tr->add_option("--epochs", train_cfg.epochs, "training epochs");
  tr->add_option("--seed", train_cfg.seed, "init + shuffle seed");
  tr->add_option("--log", tr_log, "per-epoch loss CSV output path");
  tr->callback([&] {
    const dph::Dataset ds = dph::load_dataset(tr_data);
    const dph::AblationMode mode = dph::parse_ablation_mode(tr_mode);
    dph::ModelConfig cfg;
    cfg.input_dim = ds.feature_dim;
    cfg.hidden_dims = parse_hidden_dims(tr_hidden);
    cfg.code_length = tr_bits;
    cfg.num_categories = ds.num_categories;
    cfg.num_attributes = ds.num_attributes;
    dph::DphModel model = dph::init_model(cfg, train_cfg.seed);
    const std::vector<dph::Sample> pool =
        dph::apply_ablation_mask(ds.samples, ds.partition, mode);
    const dph::TrainingLog log = dph::train(model, pool, mode, train_cfg);
    dph::save_model(model, tr_out);
    if (!tr_log.empty()) dph::save_training_log_csv(log, tr_log);
    if (!log.epochs.empty()) {
      std::cout << "trained " << dph::to_string(mode) << " pool (" << pool.size()
                << " samples), final loss " << dph::format_double(log.epochs.back().total)
                << '\n';
    }
    std::cout << "wrote checkpoint to " << tr_out << '\n';
  });

  // encode ---------------------------------------------------------------
  auto* enc = app.add_subcommand("encode", "encode dataset samples into a retrieval index");
  enc->add_option("--config", config_note,
                  "flat key = value config file; explicit flags win");
  std::string enc_ckpt, enc_data, enc_out, enc_split = "all";
  enc->add_option("--checkpoint", enc_ckpt, "model checkpoint")->required();
  enc->add_option("--data", enc_data, "dataset path")->required();
  enc->add_option("--out", enc_out, "index output path")->required();
  enc->add_option("--split", enc_split, "subset to index: all, both, category, attribute, test");
  enc->callback([&] {
    const dph::DphModel model = dph::load_model(enc_ckpt);
    const dph::Dataset ds = dph::load_dataset(enc_data);
    check_model_matches(model, ds);
    const std::vector<dph::Sample> subset = select_split(ds, enc_split);
    const dph::RetrievalIndex index = dph::build_index(model, subset);
    dph::save_index(index, enc_out);
    std::cout << "indexed " << index.size() << " codes (" << index.k
              << " bits) to " << enc_out << '\n';
  });

  // query ----------------------------------------------------------------
  auto* qr = app.add_subcommand("query", "run a retrieval task against an index");
  qr->add_option("--config", config_note,
                  "flat key = value config file; explicit flags win");
  std::string qr_index, qr_code;
  int qr_task = 1, qr_top = 10, qr_attr = -1;
  std::optional<std::uint64_t> qr_id, qr_exclude;
  std::vector<std::string> qr_clauses;
  qr->add_option("--index", qr_index, "index path")->required();
  qr->add_option("--task", qr_task, "retrieval task: 1, 2, or 3")->required();
  qr->add_option("--top", qr_top, "rows to print");
  qr->add_option("--id", qr_id, "query image id (tasks 1 and 3); excluded from its own results");
  qr->add_option("--code", qr_code, "external query code as a k-bit 0/1 string (task 1)");
  qr->add_option("--attr", qr_attr, "attribute to require present (task 3)");
  qr->add_option("--clause", qr_clauses, "attribute clause <j>=<0|1> (task 2, up to 3)");
  qr->add_option("--exclude", qr_exclude, "id to drop from the results (task 2)");
  qr->callback([&] {
    const dph::RetrievalIndex index = dph::load_index(qr_index);
    if (qr_task == 1) {
      if (!qr_code.empty()) {
        print_ranked(dph::task1_category(index, parse_code(qr_code, index.k), qr_exclude),
                     qr_top);
        return;
      }
      if (!qr_id) throw dph::QueryError("task 1 needs --id or --code");
      const auto row = index.row_of(*qr_id);
      if (!row) throw dph::QueryError("id " + std::to_string(*qr_id) + " not in index");
      print_ranked(dph::task1_category(index, index.codes[*row], *qr_id), qr_top);
    } else if (qr_task == 2) {
      dph::AttrQuery query;
      for (const std::string& text : qr_clauses) query.clauses.push_back(parse_clause(text));
      print_ranked(dph::task2_attribute(index, query, qr_exclude), qr_top);
    } else if (qr_task == 3) {
      if (!qr_id) throw dph::QueryError("task 3 needs --id");
      if (qr_attr < 0) throw dph::QueryError("task 3 needs --attr");
      const auto row = index.row_of(*qr_id);
      if (!row) throw dph::QueryError("id " + std::to_string(*qr_id) + " not in index");
      print_ranked(dph::task3_combined(index, index.codes[*row], *qr_id, qr_attr), qr_top);
    } else {
      throw dph::QueryError("--task must be 1, 2, or 3");
    }
  });

  // eval -----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "leave-one-out evaluation of all three tasks on the test set");
  ev->add_option("--config", config_note,
                  "flat key = value config file; explicit flags win");
  std::string ev_ckpt, ev_data, ev_out, ev_mode = "-";
  std::uint64_t ev_seed = 0;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--data", ev_data, "dataset path")->required();
  ev->add_option("--out", ev_out, "report output path")->required();
  ev->add_option("--seed", ev_seed, "attribute-query seed");
  ev->add_option("--mode", ev_mode, "training-pool label recorded in the report");
  ev->callback([&] {
    const dph::DphModel model = dph::load_model(ev_ckpt);
    const dph::Dataset ds = dph::load_dataset(ev_data);
    check_model_matches(model, ds);
    const dph::EvalReport report =
        dph::run_full_eval(model, dph::test_samples(ds), ev_seed, ev_mode);
    dph::save_report(report, ev_out);
    std::cout << "task1 mAP " << dph::format_double(report.task1_map) << ", mean F1 "
              << dph::format_double(report.mean_f1) << ", task2 mAP "
              << dph::format_double(report.task2_avg_map) << '\n'
              << "wrote report to " << ev_out << '\n';
  });

  // ablation ---------------------------------------------------------------
  auto* ab = app.add_subcommand("ablation", "train B/B+A/B+C/B+A+C from one init and tabulate mAP + mean F1");
  ab->add_option("--config", config_note,
                  "flat key = value config file; explicit flags win");
  std::string ab_data, ab_out, ab_hidden = "64";
  int ab_bits = 32;
  dph::TrainConfig ab_cfg;
  ab->add_option("--data", ab_data, "dataset path")->required();
  ab->add_option("--out", ab_out, "table CSV output path")->required();
  ab->add_option("--bits", ab_bits, "code length k");
  ab->add_option("--hidden", ab_hidden, "hidden layer sizes");
  ab->add_option("--alpha", ab_cfg.alpha, "attribute loss weight");
  ab->add_option("--batch", ab_cfg.batch_size, "mini-batch size");
  ab->add_option("--lr", ab_cfg.learning_rate, "learning rate");
  ab->add_option("--lr-preceding-mult", ab_cfg.lr_multiplier_pretrained,
                 "learning-rate multiplier for the hidden stack");
  ab->add_option("--momentum", ab_cfg.momentum, "SGD momentum");
  ab->add_option("--weight-decay", ab_cfg.weight_decay, "L2 weight decay");
  ab->add_option("--epochs", ab_cfg.epochs, "training epochs");
  ab->add_option("--seed", ab_cfg.seed, "init + shuffle seed");
  ab->callback([&] {
    const dph::Dataset ds = dph::load_dataset(ab_data);
    dph::ModelConfig cfg;
    cfg.input_dim = ds.feature_dim;
    cfg.hidden_dims = parse_hidden_dims(ab_hidden);
    cfg.code_length = ab_bits;
    cfg.num_categories = ds.num_categories;
    cfg.num_attributes = ds.num_attributes;
    const std::vector<dph::AblationRow> rows = dph::run_ablation(ds, cfg, ab_cfg);
    dph::save_ablation_csv(rows, ab_out);
    for (const dph::AblationRow& row : rows) {
      std::cout << dph::to_string(row.mode) << ": mAP " << dph::format_double(row.map)
                << ", mean F1 " << dph::format_double(row.mean_f1) << '\n';
    }
    std::cout << "wrote table to " << ab_out << '\n';
  });

  try {
    std::vector<std::string> args = with_config_defaults(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const dph::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
