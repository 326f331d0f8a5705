// ctvote: batch command-line front end for the CT volume voting harness.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ctvote/cli/commands.hpp"
#include "ctvote/error.hpp"

namespace {

using ctvote::cli::RunConfig;

void add_thresholds(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--t-noncovid", cfg.thresholds.t_noncovid,
                    "Drop NON_COVID votes with confidence below this")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--t-all", cfg.thresholds.t_all, "Drop any vote with confidence below this")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
}

void add_head_options(CLI::App* cmd, RunConfig& cfg, std::string& head) {
    cmd->add_option("--head", head, "Head kind")->check(CLI::IsMember({"logreg", "mlp"}))->capture_default_str();
    cmd->add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", cfg.train.lr_init, "Initial learning rate")->capture_default_str();
    cmd->add_option("--warmup", cfg.train.warmup_epochs, "Linear warmup epochs")->capture_default_str();
    cmd->add_option("--batch-size", cfg.train.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--label-smoothing", cfg.train.label_smoothing, "Label smoothing epsilon")
        ->capture_default_str();
    cmd->add_option("--sam-rho", cfg.train.sam_rho, "SAM neighbourhood radius (0 = plain SGD)")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "ctvote: CT volume sub-sampling, TTA vote aggregation, slice-feature heads and macro-F1 evaluation.\n"
        "Option precedence: command-line flags override --config file values, which override defaults."};
    app.set_config("--config", "", "INI/TOML file of option values ([subcommand] sections)");
    app.require_subcommand(1);

    RunConfig cfg;
    std::string head = "logreg";
    std::string data_dir, labels, predictions, diagnosis, features, model, out, export_dir, labels_out;

    const auto common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
        cmd->add_option("--jobs", cfg.jobs, "Patients processed concurrently")->capture_default_str();
        cmd->add_option("--out", out, "Output file (default stdout)");
    };

    auto* ingest = app.add_subcommand("ingest", "Load patient slice directories and print a manifest");
    ingest->add_option("--data-dir", data_dir, "Directory of patient subdirectories")->required();
    ingest->add_option("--labels", labels, "patient_id,LABEL file");
    ingest->add_option("--resize", cfg.resize, "Bilinear resize slices to NxN before export");
    ingest->add_option("--export-dir", export_dir, "Re-emit (resized) slices as PNG directories");
    common(ingest);

    auto* plan = app.add_subcommand("plan", "Emit sub-volume sampling plans");
    plan->add_option("--data-dir", data_dir, "Directory of patient subdirectories")->required();
    plan->add_option("--mode", cfg.mode, "train (one seeded 128-slice crop) or infer (all 256-slice sub-volumes)")
        ->check(CLI::IsMember({"train", "infer"}))
        ->capture_default_str();
    plan->add_option("--target-len", cfg.target_len, "Override the plan length");
    common(plan);

    auto* vote = app.add_subcommand("vote", "Two-threshold ensemble vote over SUBVOLUME predictions");
    vote->add_option("--predictions", predictions, "Prediction file")->required();
    add_thresholds(vote, cfg);
    common(vote);

    auto* feats = app.add_subcommand("features", "Assemble 96x3 slice-probability features");
    feats->add_option("--predictions", predictions, "Prediction file")->required();
    feats->add_option("--model-id", cfg.model_id, "Model whose SLICE records to use");
    common(feats);

    auto* train = app.add_subcommand("train-head", "Train a logistic-regression or MLP head");
    train->add_option("--features", features, "Features file")->required();
    train->add_option("--labels", labels, "patient_id,LABEL file")->required();
    add_head_options(train, cfg, head);
    common(train);

    auto* predict = app.add_subcommand("predict-head", "Diagnose patients with a trained head");
    predict->add_option("--model", model, "Head model file")->required();
    predict->add_option("--features", features, "Features file")->required();
    common(predict);

    auto* folds = app.add_subcommand("folds", "Seeded stratified fold assignment");
    folds->add_option("--labels", labels, "patient_id,LABEL file")->required();
    folds->add_option("--folds", cfg.folds_k, "Number of folds")->check(CLI::Range(2, 1000))->capture_default_str();
    common(folds);

    auto* evaluate = app.add_subcommand("eval", "Vote (or features + head) then report macro-F1");
    evaluate->add_option("--labels", labels, "Ground-truth patient_id,LABEL file")->required();
    auto* pred_opt = evaluate->add_option("--predictions", predictions, "Prediction file");
    auto* diag_opt = evaluate->add_option("--diagnosis", diagnosis, "Precomputed diagnosis file");
    pred_opt->excludes(diag_opt);
    evaluate->add_option("--model", model, "Head model; switches from voting to the feature route");
    evaluate->add_option("--model-id", cfg.model_id, "Model whose SLICE records to use");
    add_thresholds(evaluate, cfg);
    common(evaluate);

    auto* synth = app.add_subcommand("synth", "Write a synthetic prediction file and labels");
    synth->add_option("--n-covid", cfg.n_covid)->capture_default_str();
    synth->add_option("--n-noncovid", cfg.n_noncovid)->capture_default_str();
    synth->add_option("--min-slices", cfg.min_slices)->capture_default_str();
    synth->add_option("--max-slices", cfg.max_slices)->capture_default_str();
    synth->add_option("--models", cfg.models, "Ensemble size")->capture_default_str();
    synth->add_option("--noise", cfg.synthetic.noise_sigma, "Noise standard deviation")->capture_default_str();
    synth->add_option("--lesion-covid", cfg.synthetic.lesion_prob_covid)->capture_default_str();
    synth->add_option("--lesion-noncovid", cfg.synthetic.lesion_prob_noncovid)->capture_default_str();
    synth->add_option("--band", cfg.synthetic.band_fraction, "Central lesion band fraction")->capture_default_str();
    synth->add_option("--labels-out", labels_out, "Where to write the ground-truth labels");
    common(synth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ctvote::cli::kExitUsage;
    }

    cfg.data_dir = data_dir;
    cfg.labels_file = labels;
    cfg.predictions_file = predictions;
    cfg.diagnosis_file = diagnosis;
    cfg.features_file = features;
    cfg.model_file = model;
    cfg.out = out;
    cfg.export_dir = export_dir;
    cfg.labels_out = labels_out;
    cfg.head = ctvote::heads::parse_head_kind(head);

    try {
        if (*ingest) return ctvote::cli::cmd_ingest(cfg, std::cerr);
        if (*plan) return ctvote::cli::cmd_plan(cfg, std::cerr);
        if (*vote) return ctvote::cli::cmd_vote(cfg, std::cerr);
        if (*feats) return ctvote::cli::cmd_features(cfg, std::cerr);
        if (*train) return ctvote::cli::cmd_train_head(cfg, std::cerr);
        if (*predict) return ctvote::cli::cmd_predict_head(cfg, std::cerr);
        if (*folds) return ctvote::cli::cmd_folds(cfg, std::cerr);
        if (*evaluate) return ctvote::cli::cmd_eval(cfg, std::cerr);
        if (*synth) return ctvote::cli::cmd_synth(cfg, std::cerr);
    } catch (const ctvote::cli::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return ctvote::cli::kExitUsage;
    } catch (const ctvote::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ctvote::is_data_error(e.code()) ? ctvote::cli::kExitData : ctvote::cli::kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return ctvote::cli::kExitInternal;
    }
    return ctvote::cli::kExitUsage;
}
