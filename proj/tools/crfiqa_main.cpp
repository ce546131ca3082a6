#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crfiqa/commands.hpp"
#include "crfiqa/version.hpp"

namespace {

using namespace crfiqa;

int dispatch(CLI::App& app, int argc, char** argv, GenDataArgs& gen, TrainArgs& tr,
             ScoreArgs& sc, ErcArgs& erc, WeightedVerifyArgs& wv) {
  CLI::App* gen_cmd = app.get_subcommand("gen-data");
  CLI::App* train_cmd = app.get_subcommand("train");
  CLI::App* score_cmd = app.get_subcommand("score");
  CLI::App* erc_cmd = app.get_subcommand("erc");
  CLI::App* wv_cmd = app.get_subcommand("weighted-verify");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit code 0
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen_cmd->parsed()) return cmd_gen_data(gen);
  if (train_cmd->parsed()) return cmd_train(tr);
  if (score_cmd->parsed()) return cmd_score(sc);
  if (erc_cmd->parsed()) return cmd_erc(erc);
  if (wv_cmd->parsed()) return cmd_weighted_verify(wv);

  std::cout << app.help();
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classifiability-regression embedding training and quality evaluation"};
  app.set_version_flag("--version", std::string(crfiqa::kVersion));
  app.require_subcommand(0, 1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic identity dataset");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--classes", gen.classes, "Number of identities");
  gen_cmd->add_option("--per-class", gen.per_class, "Samples per identity");
  gen_cmd->add_option("--dim", gen.dim, "Input dimension");
  gen_cmd->add_option("--noise-levels", gen.noise_levels, "Ascending sigma list")
      ->delimiter(',');
  gen_cmd->add_option("--holdout-per-class", gen.holdout_per_class,
                      "Held-out samples per class (writes a train/eval split)");
  gen_cmd->add_option("--genuine", gen.num_genuine, "Genuine pairs to draw");
  gen_cmd->add_option("--impostor", gen.num_impostor, "Impostor pairs to draw");
  gen_cmd->add_option("--templates-per-class", gen.templates_per_class,
                      "Also write template grouping/pair files");
  gen_cmd->add_option("--template-impostors", gen.template_impostors,
                      "Impostor template pairs (default: as many as genuine)");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the embedding model and quality head");
  train_cmd->add_option("--dataset", tr.dataset, "Training dataset CSV")->required();
  train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();
  train_cmd->add_option("--checkpoint", tr.checkpoint_in, "Frozen model for --mode on-top");
  train_cmd->add_option("--seed", tr.seed, "RNG seed");
  train_cmd->add_option("--iterations", tr.iterations, "Optimizer steps");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  train_cmd->add_option("--lr", tr.lr, "Initial learning rate");
  train_cmd->add_option("--lr-milestones", tr.lr_milestones,
                        "Iterations at which lr is divided by 10")
      ->delimiter(',');
  train_cmd->add_option("--momentum", tr.momentum, "SGD momentum");
  train_cmd->add_option("--weight-decay", tr.weight_decay, "L2 weight decay");
  train_cmd->add_option("--lambda", tr.lambda, "Regression loss weight");
  train_cmd->add_option("--margin", tr.margin, "Additive angular margin (radians)");
  train_cmd->add_option("--scale", tr.scale, "Logit scale");
  train_cmd->add_option("--beta", tr.beta, "Smooth-L1 switch point");
  train_cmd->add_option("--eps", tr.eps, "CR denominator shift");
  train_cmd->add_option("--target", tr.target, "Regression target")
      ->check(CLI::IsMember({"cr", "ccs"}));
  train_cmd->add_option("--mode", tr.mode, "Training mode")
      ->check(CLI::IsMember({"simultaneous", "on-top"}));
  train_cmd->add_option("--embedding-dim", tr.embedding_dim, "Embedding dimension");
  train_cmd->add_option("--hidden", tr.hidden_dims, "Hidden layer widths")->delimiter(',');
  train_cmd->add_option("--activation", tr.activation, "Hidden activation")
      ->check(CLI::IsMember({"relu", "tanh"}));
  train_cmd->add_flag("--head-on-normalized", tr.head_on_normalized,
                      "Quality head reads the unit-norm embedding");
  train_cmd->add_option("--log-interval", tr.log_interval, "Iterations between log rows");

  ScoreArgs sc;
  CLI::App* score_cmd = app.add_subcommand("score", "Predict quality scores for a dataset");
  score_cmd->add_option("--checkpoint", sc.checkpoint, "Trained model")->required();
  score_cmd->add_option("--dataset", sc.dataset, "Dataset CSV")->required();
  score_cmd->add_option("--out", sc.out_dir, "Output directory")->required();

  ErcArgs erc;
  CLI::App* erc_cmd = app.add_subcommand("erc", "Error-vs-reject curve from scores and pairs");
  erc_cmd->add_option("--checkpoint", erc.checkpoint, "Model for verification embeddings")
      ->required();
  erc_cmd->add_option("--dataset", erc.dataset, "Dataset CSV")->required();
  erc_cmd->add_option("--pairs", erc.pairs, "Pair CSV")->required();
  erc_cmd->add_option("--scores", erc.scores, "Quality score CSV")->required();
  erc_cmd->add_option("--out", erc.out_dir, "Output directory")->required();
  erc_cmd->add_option("--fmr", erc.fmr, "Fixed false match rate");
  erc_cmd->add_option("--grid-step", erc.grid_step, "Rejection grid step");
  erc_cmd->add_option("--grid-max", erc.grid_max, "Largest rejection ratio");
  erc_cmd->add_option("--pair-quality", erc.pair_quality, "Pair quality rule")
      ->check(CLI::IsMember({"min", "mean"}));

  WeightedVerifyArgs wv;
  CLI::App* wv_cmd =
      app.add_subcommand("weighted-verify", "Quality-weighted template verification");
  wv_cmd->add_option("--checkpoint", wv.checkpoint, "Model for embeddings")->required();
  wv_cmd->add_option("--dataset", wv.dataset, "Dataset CSV")->required();
  wv_cmd->add_option("--templates", wv.templates, "Template grouping CSV")->required();
  wv_cmd->add_option("--pairs", wv.pairs, "Template pair CSV")->required();
  wv_cmd->add_option("--scores", wv.scores, "Quality score CSV")->required();
  wv_cmd->add_option("--out", wv.out_dir, "Output directory")->required();
  wv_cmd->add_option("--fmr", wv.fmr, "Fixed false match rate");

  return dispatch(app, argc, argv, gen, tr, sc, erc, wv);
}
