#include "crfiqa/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <span>
#include <unordered_map>

#include <json.hpp>

#include "crfiqa/csv.hpp"
#include "crfiqa/errors.hpp"
#include "crfiqa/evaluation.hpp"
#include "crfiqa/geometry.hpp"
#include "crfiqa/log.hpp"
#include "crfiqa/model.hpp"
#include "crfiqa/rng.hpp"
#include "crfiqa/synthdata.hpp"
#include "crfiqa/trainer.hpp"
#include "crfiqa/version.hpp"

namespace crfiqa {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr uint64_t kPairSeedSalt = 0x70616972u;      // "pair"
constexpr uint64_t kTemplateSeedSalt = 0x746d706cu;  // "tmpl"

int run_command(const std::string& name, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const DivergenceError& e) {
    log_error(name + ": diverged: " + e.what());
    return kExitDivergence;
  } catch (const UsageError& e) {
    log_error(name + ": " + e.what());
    return kExitUsage;
  } catch (const Error& e) {
    log_error(name + ": " + e.what());
    return kExitData;
  } catch (const std::exception& e) {
    log_error(name + ": " + e.what());
    return kExitData;
  }
}

void ensure_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_manifest(const std::string& out_dir, const std::string& command, uint64_t seed,
                    const json& config_snapshot, const json& inputs, const json& outputs) {
  json manifest;
  manifest["command"] = command;
  manifest["config_snapshot"] = config_snapshot;
  manifest["seed"] = seed;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["tool_version"] = kVersion;
  const std::string path = join_path(out_dir, "manifest.json");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("error writing '" + path + "'");
}

struct ScoreRow {
  double raw = 0.0;
  double norm = 0.0;
};

void write_scores_csv(const std::string& path, std::span<const int> ids,
                      std::span<const double> raw, std::span<const double> norm) {
  CsvWriter out(path);
  out.row({"id", "quality_raw", "quality_norm"});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.row({std::to_string(ids[i]), format_double(raw[i]), format_double(norm[i])});
  }
}

std::unordered_map<int, ScoreRow> read_scores_csv(const std::string& path) {
  CsvReader in(path);
  in.expect_header({"id", "quality_raw", "quality_norm"});
  std::unordered_map<int, ScoreRow> rows;
  while (in.next()) {
    if (in.fields().size() != 3) in.fail(0, "expected 3 fields");
    const int id = static_cast<int>(in.as_int(0));
    if (!rows.emplace(id, ScoreRow{in.as_double(1), in.as_double(2)}).second) {
      in.fail(0, "duplicate id " + std::to_string(id));
    }
  }
  if (rows.empty()) throw ParseError(path, 1, 1, "score file has no rows");
  return rows;
}

struct TemplateTable {
  std::vector<int> order;  // template ids in first-appearance order
  std::unordered_map<int, std::vector<int>> members;
};

TemplateTable read_templates_csv(const std::string& path) {
  CsvReader in(path);
  in.expect_header({"template_id", "sample_id"});
  TemplateTable table;
  while (in.next()) {
    if (in.fields().size() != 2) in.fail(0, "expected 2 fields");
    const int tid = static_cast<int>(in.as_int(0));
    const int sid = static_cast<int>(in.as_int(1));
    auto [it, inserted] = table.members.try_emplace(tid);
    if (inserted) table.order.push_back(tid);
    it->second.push_back(sid);
  }
  if (table.order.empty()) throw ParseError(path, 1, 1, "template file has no rows");
  return table;
}

// Normalized embedding per dataset row, via the model.
EmbeddingStore embed_dataset(const ModelState& state, const std::vector<SyntheticSample>& samples) {
  EmbeddingStore store(state.backbone.embedding_dim);
  for (const SyntheticSample& s : samples) {
    if (static_cast<int>(s.input.size()) != state.backbone.input_dim) {
      throw ConfigError("dataset dim " + std::to_string(s.input.size()) +
                        " does not match checkpoint input_dim " +
                        std::to_string(state.backbone.input_dim));
    }
    store.add(s.id, forward(state, s.input).normalized);
  }
  return store;
}

json to_json(const std::vector<double>& v) { return json(v); }
json to_json(const std::vector<int>& v) { return json(v); }
json to_json(const std::vector<long long>& v) { return json(v); }

}  // namespace

int cmd_gen_data(const GenDataArgs& args) {
  return run_command("gen-data", [&] {
    ensure_out_dir(args.out_dir);

    SyntheticSpec spec;
    spec.num_classes = args.classes;
    spec.samples_per_class = args.per_class;
    spec.input_dim = args.dim;
    spec.noise_levels = args.noise_levels;
    spec.seed = args.seed;
    const std::vector<SyntheticSample> samples = generate(spec);

    json outputs;
    std::vector<const SyntheticSample*> pair_source;
    if (args.holdout_per_class > 0) {
      const SplitResult split = split_per_class(samples, args.holdout_per_class);
      write_dataset_csv(join_path(args.out_dir, "dataset_train.csv"), split.train);
      write_dataset_csv(join_path(args.out_dir, "dataset_eval.csv"), split.heldout);
      outputs["dataset_train"] = "dataset_train.csv";
      outputs["dataset_eval"] = "dataset_eval.csv";
      const PairList pairs =
          make_pairs(split.heldout, args.num_genuine, args.num_impostor, args.seed ^ kPairSeedSalt);
      write_pairs_csv(join_path(args.out_dir, "pairs_eval.csv"), pairs);
      outputs["pairs"] = "pairs_eval.csv";
      log_info("gen-data: " + std::to_string(split.train.size()) + " train rows, " +
               std::to_string(split.heldout.size()) + " eval rows, " +
               std::to_string(pairs.size()) + " eval pairs");
    } else {
      write_dataset_csv(join_path(args.out_dir, "dataset.csv"), samples);
      outputs["dataset"] = "dataset.csv";
      const PairList pairs =
          make_pairs(samples, args.num_genuine, args.num_impostor, args.seed ^ kPairSeedSalt);
      write_pairs_csv(join_path(args.out_dir, "pairs.csv"), pairs);
      outputs["pairs"] = "pairs.csv";
      log_info("gen-data: " + std::to_string(samples.size()) + " rows, " +
               std::to_string(pairs.size()) + " pairs");
    }

    if (args.templates_per_class > 0) {
      if (args.templates_per_class > args.per_class) {
        throw ConfigError("templates-per-class exceeds samples per class");
      }
      // Template t of class j collects the samples whose within-class index
      // is congruent to t, so every template mixes noise levels.
      CsvWriter tmpl(join_path(args.out_dir, "templates.csv"));
      tmpl.row({"template_id", "sample_id"});
      for (const SyntheticSample& s : samples) {
        const int within = s.id - s.label * args.per_class;
        const int tid = s.label * args.templates_per_class + within % args.templates_per_class;
        tmpl.row({std::to_string(tid), std::to_string(s.id)});
      }

      PairList template_pairs;
      for (int j = 0; j < args.classes; ++j) {
        for (int a = 0; a < args.templates_per_class; ++a) {
          for (int b = a + 1; b < args.templates_per_class; ++b) {
            template_pairs.push_back(
                {j * args.templates_per_class + a, j * args.templates_per_class + b, true});
          }
        }
      }
      const int num_genuine_templates = static_cast<int>(template_pairs.size());
      std::vector<std::pair<int, int>> impostor_candidates;
      for (int ja = 0; ja < args.classes; ++ja) {
        for (int jb = ja + 1; jb < args.classes; ++jb) {
          for (int a = 0; a < args.templates_per_class; ++a) {
            for (int b = 0; b < args.templates_per_class; ++b) {
              impostor_candidates.emplace_back(ja * args.templates_per_class + a,
                                               jb * args.templates_per_class + b);
            }
          }
        }
      }
      Rng rng(args.seed ^ kTemplateSeedSalt);
      rng.shuffle(impostor_candidates);
      const int want = args.template_impostors > 0 ? args.template_impostors
                                                   : num_genuine_templates;
      if (static_cast<std::size_t>(want) > impostor_candidates.size()) {
        throw PairConstructionError("requested " + std::to_string(want) +
                                    " impostor template pairs but only " +
                                    std::to_string(impostor_candidates.size()) + " exist");
      }
      for (int i = 0; i < want; ++i) {
        template_pairs.push_back({impostor_candidates[static_cast<std::size_t>(i)].first,
                                  impostor_candidates[static_cast<std::size_t>(i)].second, false});
      }
      write_pairs_csv(join_path(args.out_dir, "template_pairs.csv"), template_pairs);
      outputs["templates"] = "templates.csv";
      outputs["template_pairs"] = "template_pairs.csv";
    }

    json config;
    config["classes"] = args.classes;
    config["per_class"] = args.per_class;
    config["dim"] = args.dim;
    config["noise_levels"] = to_json(args.noise_levels);
    config["holdout_per_class"] = args.holdout_per_class;
    config["num_genuine"] = args.num_genuine;
    config["num_impostor"] = args.num_impostor;
    config["templates_per_class"] = args.templates_per_class;
    config["template_impostors"] = args.template_impostors;
    write_manifest(args.out_dir, "gen-data", args.seed, config, json::object(), outputs);
  });
}

namespace {

TrainConfig train_config_from_args(const TrainArgs& args) {
  TrainConfig cfg;
  cfg.loss.s = args.scale;
  cfg.loss.m = args.margin;
  cfg.loss.lambda = args.lambda;
  cfg.loss.beta = args.beta;
  cfg.loss.eps = args.eps;
  cfg.batch_size = args.batch_size;
  cfg.total_iterations = args.iterations;
  cfg.lr = args.lr;
  cfg.lr_milestones = args.lr_milestones;
  cfg.momentum = args.momentum;
  cfg.weight_decay = args.weight_decay;
  cfg.seed = args.seed;
  if (args.target == "cr") {
    cfg.target_mode = TrainConfig::Target::cr;
  } else if (args.target == "ccs") {
    cfg.target_mode = TrainConfig::Target::ccs;
  } else {
    throw UsageError("--target must be cr or ccs");
  }
  if (args.mode == "simultaneous") {
    cfg.training_mode = TrainConfig::Mode::simultaneous;
  } else if (args.mode == "on-top") {
    cfg.training_mode = TrainConfig::Mode::on_top;
  } else {
    throw UsageError("--mode must be simultaneous or on-top");
  }
  cfg.log_interval = args.log_interval;
  return cfg;
}

json train_config_snapshot(const TrainArgs& args) {
  json config;
  config["iterations"] = args.iterations;
  config["batch_size"] = args.batch_size;
  config["lr"] = args.lr;
  config["lr_milestones"] = to_json(args.lr_milestones);
  config["momentum"] = args.momentum;
  config["weight_decay"] = args.weight_decay;
  config["lambda"] = args.lambda;
  config["margin"] = args.margin;
  config["scale"] = args.scale;
  config["beta"] = args.beta;
  config["eps"] = args.eps;
  config["target"] = args.target;
  config["mode"] = args.mode;
  config["embedding_dim"] = args.embedding_dim;
  config["hidden_dims"] = to_json(args.hidden_dims);
  config["activation"] = args.activation;
  config["head_on_normalized"] = args.head_on_normalized;
  config["log_interval"] = args.log_interval;
  return config;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  return run_command("train", [&] {
    if (args.dataset.empty()) throw UsageError("--dataset is required");
    ensure_out_dir(args.out_dir);
    const TrainConfig cfg = train_config_from_args(args);

    const std::vector<SyntheticSample> samples = read_dataset_csv(args.dataset);
    const TrainingSet data = to_training_set(samples);

    int num_classes = 0;
    for (int label : data.labels) num_classes = std::max(num_classes, label + 1);

    TrainResult result;
    if (cfg.training_mode == TrainConfig::Mode::on_top) {
      if (args.checkpoint_in.empty()) throw UsageError("--mode on-top requires --checkpoint");
      const ModelState frozen = load_checkpoint(args.checkpoint_in);
      if (frozen.backbone.input_dim != data.inputs.cols) {
        throw ConfigError("checkpoint input_dim " + std::to_string(frozen.backbone.input_dim) +
                          " does not match dataset dim " + std::to_string(data.inputs.cols));
      }
      if (num_classes > frozen.num_classes) {
        throw ConfigError("dataset has labels beyond the checkpoint's class count");
      }
      result = train_on_top_with_reports(frozen, data, cfg);
    } else {
      BackboneConfig backbone;
      backbone.input_dim = data.inputs.cols;
      backbone.hidden_dims = args.hidden_dims;
      backbone.embedding_dim = args.embedding_dim;
      if (args.activation == "relu") {
        backbone.activation = Activation::relu;
      } else if (args.activation == "tanh") {
        backbone.activation = Activation::tanh;
      } else {
        throw UsageError("--activation must be relu or tanh");
      }
      const ModelState initial =
          init_model(backbone, num_classes, args.seed, args.head_on_normalized);
      result = train(initial, data, cfg);
    }

    const std::string ckpt_path = join_path(args.out_dir, "checkpoint.bin");
    const std::string log_path = join_path(args.out_dir, "train_log.csv");
    save_checkpoint(result.state, ckpt_path);
    write_training_log_csv(log_path, result.reports, cfg.log_interval);

    if (!result.reports.empty()) {
      const StepReport& last = result.reports.back();
      log_info("train: final arc_loss=" + format_double(last.arc_loss) +
               " cr_loss=" + format_double(last.cr_loss) +
               " mean_ccs=" + format_double(last.mean_ccs));
    }

    json inputs;
    inputs["dataset"] = args.dataset;
    if (!args.checkpoint_in.empty()) inputs["checkpoint"] = args.checkpoint_in;
    json outputs;
    outputs["checkpoint"] = "checkpoint.bin";
    outputs["train_log"] = "train_log.csv";
    write_manifest(args.out_dir, "train", args.seed, train_config_snapshot(args), inputs, outputs);
  });
}

int cmd_score(const ScoreArgs& args) {
  return run_command("score", [&] {
    if (args.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (args.dataset.empty()) throw UsageError("--dataset is required");
    ensure_out_dir(args.out_dir);

    const ModelState state = load_checkpoint(args.checkpoint);
    const std::vector<SyntheticSample> samples = read_dataset_csv(args.dataset);
    if (static_cast<int>(samples.front().input.size()) != state.backbone.input_dim) {
      throw ConfigError("dataset dim " + std::to_string(samples.front().input.size()) +
                        " does not match checkpoint input_dim " +
                        std::to_string(state.backbone.input_dim));
    }

    std::vector<int> ids;
    Matrix inputs(static_cast<int>(samples.size()), state.backbone.input_dim);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ids.push_back(samples[i].id);
      std::copy(samples[i].input.begin(), samples[i].input.end(),
                inputs.row(static_cast<int>(i)).begin());
    }
    const std::vector<double> raw = predict_quality(state, inputs);
    const std::vector<double> norm = normalize_scores(raw);
    write_scores_csv(join_path(args.out_dir, "scores.csv"), ids, raw, norm);

    json inputs_json;
    inputs_json["checkpoint"] = args.checkpoint;
    inputs_json["dataset"] = args.dataset;
    json outputs;
    outputs["scores"] = "scores.csv";
    write_manifest(args.out_dir, "score", 0, json::object(), inputs_json, outputs);
    log_info("score: wrote " + std::to_string(ids.size()) + " rows");
  });
}

namespace {

// Collects ids referenced by pairs that are missing from the stores; the
// full offender list goes in one error.
void check_pair_ids(const PairList& pairs, const EmbeddingStore& embeddings,
                    const std::unordered_map<int, ScoreRow>& scores) {
  std::set<int> missing;
  for (const Pair& p : pairs) {
    for (int id : {p.id_a, p.id_b}) {
      if (!embeddings.contains(id) || !scores.contains(id)) missing.insert(id);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (int id : missing) {
      if (!list.empty()) list += ", ";
      list += std::to_string(id);
    }
    throw LookupError("pairs reference unknown ids: " + list);
  }
}

}  // namespace

int cmd_erc(const ErcArgs& args) {
  return run_command("erc", [&] {
    if (args.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (args.dataset.empty()) throw UsageError("--dataset is required");
    if (args.pairs.empty()) throw UsageError("--pairs is required");
    if (args.scores.empty()) throw UsageError("--scores is required");
    if (args.pair_quality != "min" && args.pair_quality != "mean") {
      throw UsageError("--pair-quality must be min or mean");
    }
    ensure_out_dir(args.out_dir);

    const ModelState state = load_checkpoint(args.checkpoint);
    const std::vector<SyntheticSample> samples = read_dataset_csv(args.dataset);
    const PairList pairs = read_pairs_csv(args.pairs);
    const std::unordered_map<int, ScoreRow> scores = read_scores_csv(args.scores);

    const EmbeddingStore embeddings = embed_dataset(state, samples);
    check_pair_ids(pairs, embeddings, scores);

    std::vector<GenuinePair> genuine;
    std::vector<double> impostor_scores;
    for (const Pair& p : pairs) {
      const double s = cosine_similarity(embeddings.get(p.id_a), embeddings.get(p.id_b));
      if (p.genuine) {
        const double qa = scores.at(p.id_a).raw;
        const double qb = scores.at(p.id_b).raw;
        const double q = args.pair_quality == "min" ? std::min(qa, qb) : 0.5 * (qa + qb);
        genuine.push_back({s, q});
      } else {
        impostor_scores.push_back(s);
      }
    }

    const std::vector<double> grid = reject_grid(args.grid_step, args.grid_max);
    const ErcCurve curve = erc_curve(genuine, impostor_scores, args.fmr, grid);

    write_erc_csv(join_path(args.out_dir, "erc.csv"), curve);
    write_erc_json(join_path(args.out_dir, "erc.json"), curve);

    json config;
    config["fmr"] = args.fmr;
    config["grid_step"] = args.grid_step;
    config["grid_max"] = args.grid_max;
    config["pair_quality"] = args.pair_quality;
    json inputs;
    inputs["checkpoint"] = args.checkpoint;
    inputs["dataset"] = args.dataset;
    inputs["pairs"] = args.pairs;
    inputs["scores"] = args.scores;
    json outputs;
    outputs["erc_csv"] = "erc.csv";
    outputs["erc_json"] = "erc.json";
    write_manifest(args.out_dir, "erc", 0, config, inputs, outputs);

    std::cout << format_double(curve.auc) << "\n";
  });
}

int cmd_weighted_verify(const WeightedVerifyArgs& args) {
  return run_command("weighted-verify", [&] {
    if (args.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (args.dataset.empty()) throw UsageError("--dataset is required");
    if (args.templates.empty()) throw UsageError("--templates is required");
    if (args.pairs.empty()) throw UsageError("--pairs is required");
    if (args.scores.empty()) throw UsageError("--scores is required");
    ensure_out_dir(args.out_dir);

    const ModelState state = load_checkpoint(args.checkpoint);
    const std::vector<SyntheticSample> samples = read_dataset_csv(args.dataset);
    const TemplateTable templates = read_templates_csv(args.templates);
    const PairList template_pairs = read_pairs_csv(args.pairs);
    const std::unordered_map<int, ScoreRow> scores = read_scores_csv(args.scores);

    const EmbeddingStore sample_embeddings = embed_dataset(state, samples);

    for (const Pair& p : template_pairs) {
      for (int tid : {p.id_a, p.id_b}) {
        const auto it = templates.members.find(tid);
        if (it == templates.members.end() || it->second.empty()) {
          throw DegenerateWeightsError("template " + std::to_string(tid) +
                                       " has no member samples");
        }
      }
    }

    const auto aggregate_all = [&](bool weighted) {
      EmbeddingStore store(state.backbone.embedding_dim);
      for (int tid : templates.order) {
        const std::vector<int>& member_ids = templates.members.at(tid);
        std::vector<std::vector<double>> members;
        std::vector<double> weights;
        for (int sid : member_ids) {
          const auto emb = sample_embeddings.get(sid);
          members.emplace_back(emb.begin(), emb.end());
          if (weighted) {
            const auto it = scores.find(sid);
            if (it == scores.end()) {
              throw LookupError("template " + std::to_string(tid) + " member " +
                                std::to_string(sid) + " has no quality score");
            }
            weights.push_back(it->second.norm);
          } else {
            weights.push_back(1.0);
          }
        }
        try {
          store.add(tid, weighted_template_aggregate(members, weights));
        } catch (const DegenerateWeightsError& e) {
          throw DegenerateWeightsError("template " + std::to_string(tid) + ": " + e.what());
        }
      }
      return store;
    };

    const auto evaluate_store = [&](const EmbeddingStore& store) {
      std::vector<double> genuine_scores;
      std::vector<double> impostor_scores;
      for (const Pair& p : template_pairs) {
        const double s = cosine_similarity(store.get(p.id_a), store.get(p.id_b));
        (p.genuine ? genuine_scores : impostor_scores).push_back(s);
      }
      const double threshold = threshold_at_fmr(impostor_scores, args.fmr);
      return std::pair<double, double>(threshold, fnmr_at_threshold(genuine_scores, threshold));
    };

    const auto [w_threshold, w_fnmr] = evaluate_store(aggregate_all(true));
    const auto [u_threshold, u_fnmr] = evaluate_store(aggregate_all(false));

    json report;
    report["fmr_target"] = args.fmr;
    report["weighted"] = {{"threshold", w_threshold}, {"fnmr", w_fnmr}};
    report["uniform"] = {{"threshold", u_threshold}, {"fnmr", u_fnmr}};
    const std::string report_path = join_path(args.out_dir, "report.json");
    {
      std::ofstream out(report_path, std::ios::binary);
      if (!out) throw IoError("cannot open '" + report_path + "' for writing");
      out << report.dump(2) << "\n";
      if (!out) throw IoError("error writing '" + report_path + "'");
    }

    json config;
    config["fmr"] = args.fmr;
    json inputs;
    inputs["checkpoint"] = args.checkpoint;
    inputs["dataset"] = args.dataset;
    inputs["templates"] = args.templates;
    inputs["pairs"] = args.pairs;
    inputs["scores"] = args.scores;
    json outputs;
    outputs["report"] = "report.json";
    write_manifest(args.out_dir, "weighted-verify", 0, config, inputs, outputs);

    std::cout << "fnmr_weighted=" << format_double(w_fnmr)
              << " fnmr_uniform=" << format_double(u_fnmr) << "\n";
  });
}

}  // namespace crfiqa
