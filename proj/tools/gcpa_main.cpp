#include "CLI11.hpp"
#include "gcpa/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"GCPANet salient object detection"};
    app.require_subcommand(1);

    gcpa::cli::TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a model from a run config");
    train->add_option("--config", ta.config_path, "run configuration JSON")->required();
    train->add_option("--output", ta.output_dir, "override the configured output directory");
    train->add_option("--resume", ta.resume, "checkpoint to continue from");
    train->add_option("--seed", ta.seed, "override the configured seed");

    std::string ckpt, in_dir, out_dir;
    long resize = 0;
    auto* infer = app.add_subcommand("infer", "write saliency maps for a directory of images");
    infer->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    infer->add_option("--input", in_dir, "directory of input images")->required();
    infer->add_option("--output", out_dir, "directory for output PNGs")->required();
    infer->add_option("--resize", resize, "network input size (default 320)");

    std::string pred_dir, gt_dir, report_path, eval_name;
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--pred", pred_dir, "directory of predicted maps")->required();
    eval->add_option("--gt", gt_dir, "directory of ground-truth masks")->required();
    eval->add_option("--output", report_path, "report JSON path")->required();
    eval->add_option("--name", eval_name, "dataset name for the printed row");

    std::vector<std::string> reports;
    std::string plot_dir;
    auto* plot = app.add_subcommand("plot", "render PR and F-measure curves from reports");
    plot->add_option("reports", reports, "one or more report JSON files")->required();
    plot->add_option("--output", plot_dir, "directory for images and csv files")->required();

    gcpa::cli::AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "train and score the component ablations");
    ablate->add_option("--config", aa.config_path, "run configuration JSON")->required();
    ablate->add_option("--output", aa.output_dir, "override the configured output directory");
    ablate->add_option("--seed", aa.seed, "override the configured seed");
    ablate->add_flag("--full-scale", aa.full_scale,
                     "allow schedules beyond the desk-scale step cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : gcpa::cli::kUsage;
    }

    if (train->parsed()) return gcpa::cli::cmd_train(ta);
    if (infer->parsed()) return gcpa::cli::cmd_infer(ckpt, in_dir, out_dir, resize);
    if (eval->parsed()) return gcpa::cli::cmd_eval(pred_dir, gt_dir, report_path, eval_name);
    if (plot->parsed()) return gcpa::cli::cmd_plot(reports, plot_dir);
    if (ablate->parsed()) return gcpa::cli::cmd_ablate(aa);
    return gcpa::cli::kUsage;
}
