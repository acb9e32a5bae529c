#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "CLI11.hpp"

#include "awdiff/diffusion.hpp"
#include "awdiff/metrics.hpp"
#include "awdiff/parallel.hpp"
#include "awdiff/phantom.hpp"
#include "awdiff/training.hpp"

namespace fs = std::filesystem;
using namespace awdiff;

namespace {

int run_phantom(const std::string& out_dir, int count, int width, int height, std::uint64_t seed,
                double speckle, int max_blines, bool irregular) {
    fs::create_directories(fs::path(out_dir) / "images");
    std::ofstream labels(fs::path(out_dir) / "labels.tsv");
    if (!labels) throw IoError("cannot write labels.tsv in " + out_dir);
    std::vector<std::pair<Image, LabelPrompt>> items(count);
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
        PhantomParams p;
        p.width = width;
        p.height = height;
        p.speckle_sigma = speckle;
        p.n_blines = static_cast<int>(i) % (max_blines + 1);
        p.irregular_pleura = irregular;
        p.seed = derive_seed(seed, i);
        items[i] = generate_phantom(p);
    });
    for (int i = 0; i < count; ++i) {
        std::ostringstream name;
        name << "phantom_" << std::setw(4) << std::setfill('0') << i << ".pgm";
        save_image(items[i].first, (fs::path(out_dir) / "images" / name.str()).string());
        labels << name.str() << "\t" << items[i].second.text << "\n";
    }
    std::cout << "wrote " << count << " phantoms to " << out_dir << "\n";
    return 0;
}

int run_decompose(const std::string& input, const std::string& out_dir, int scales) {
    Image img = load_image(input);
    WaveletPyramid pyr = starlet_decompose(img, scales);
    fs::create_directories(out_dir);
    pyr.save((fs::path(out_dir) / "pyramid.awt").string());

    // Plane PGMs are visualizations: signed coefficients are mapped to
    // [0,1] around mid-gray. pyramid.awt carries the exact values.
    for (int s = 0; s < pyr.scales(); ++s) {
        const Image& plane = pyr.planes[s];
        double max_abs = 0.0;
        for (double v : plane.pixels()) max_abs = std::max(max_abs, std::abs(v));
        Image vis(plane.width(), plane.height());
        for (std::size_t i = 0; i < plane.size(); ++i)
            vis.pixels()[i] = max_abs > 0.0 ? 0.5 + 0.5 * plane.pixels()[i] / max_abs : 0.5;
        save_image(vis, (fs::path(out_dir) / ("wp" + std::to_string(s + 1) + ".pgm")).string());
    }
    save_image(pyr.residual, (fs::path(out_dir) / "residual.pgm").string());

    Image rec = starlet_reconstruct(pyr);
    double err = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i)
        err = std::max(err, std::abs(rec.pixels()[i] - img.pixels()[i]));
    std::cout << "scales " << scales << ", reconstruction max abs error " << err << "\n";
    return 0;
}

int run_schedule(int steps, double beta_start, double beta_end, const std::string& out_path) {
    NoiseSchedule sched = linear_beta_schedule(steps, beta_start, beta_end);
    if (out_path.empty()) {
        std::cout << sched.dump_table();
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot open for writing: " + out_path);
        out << sched.dump_table();
    }
    return 0;
}

struct TrainOverrides {
    long steps = -1;
    int batch = -1, schedule_steps = -1, scales = -1;
    double lambda1 = -1.0, ema_decay = -1.0, beta_start = -1.0, beta_end = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              const std::string& resume, bool verbose, const TrainOverrides& ov) {
    TrainingConfig cfg =
        config_path.empty() ? TrainingConfig{} : TrainingConfig::from_file(config_path);
    if (ov.steps >= 0) cfg.steps = ov.steps;
    if (ov.batch > 0) cfg.batch_size = ov.batch;
    if (ov.schedule_steps > 0) cfg.schedule_steps = ov.schedule_steps;
    if (ov.scales > 0) cfg.scales = ov.scales;
    if (ov.lambda1 >= 0.0) cfg.lambda1 = ov.lambda1;
    if (ov.ema_decay >= 0.0) cfg.ema_decay = ov.ema_decay;
    if (ov.beta_start > 0.0) cfg.beta_start = ov.beta_start;
    if (ov.beta_end > 0.0) cfg.beta_end = ov.beta_end;
    if (ov.seed_set) cfg.seed = ov.seed;
    cfg.validate();
    Dataset dataset = Dataset::load(data_dir, cfg.scales, cfg.embed_dim);
    TrainOptions options;
    options.out_dir = out_dir;
    options.resume_checkpoint = resume;
    options.verbose = verbose;
    TrainResult result = train(dataset, cfg, options);
    if (!result.curve.empty())
        std::cout << "trained to step " << result.curve.back().step << ", final mse "
                  << result.curve.back().mse << "\n";
    else
        std::cout << "no steps to run\n";
    std::cout << "checkpoints and loss.csv in " << out_dir << "\n";
    return 0;
}

int run_sample(const std::string& checkpoint_dir, const std::string& reference_path,
               const std::string& label_text, const std::string& embedding_path, int count,
               std::uint64_t seed, const std::string& out_dir, bool use_ema,
               const std::string& variance) {
    if (count < 1) throw ParameterError("count must be >= 1");
    Checkpoint ckpt = load_checkpoint(checkpoint_dir);
    DenoiserParams params = ckpt.params;
    if (use_ema) params.set = ckpt.ema;

    Image reference = load_image(reference_path);
    WaveletPyramid features = encoder_features(reference, ckpt.config.scales);

    ConditioningEmbedding z_y;
    if (!embedding_path.empty())
        z_y = load_external_embedding(embedding_path, ckpt.config.embed_dim);
    else
        z_y = toy_text_embed(LabelPrompt{label_text}, ckpt.config.embed_dim);

    NoiseSchedule sched = ckpt.config.schedule();
    fs::create_directories(out_dir);

    std::vector<Image> outputs(count);
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
        SamplerConfig cfg;
        cfg.seed = derive_seed(seed, i);
        cfg.variance_mode = variance == "beta_tilde" ? VarianceMode::BetaTilde : VarianceMode::Beta;
        outputs[i] = sample(params, sched, z_y, features, cfg);
    });
    for (int i = 0; i < count; ++i) {
        std::ostringstream name;
        name << "sample_" << std::setw(4) << std::setfill('0') << i << ".pgm";
        save_image(outputs[i], (fs::path(out_dir) / name.str()).string());
    }
    std::cout << "wrote " << count << " samples to " << out_dir << "\n";
    return 0;
}

std::vector<std::string> image_names(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".awt") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

int run_eval(const std::string& originals_dir, const std::string& generated_dir,
             const std::string& out_csv, const std::string& hist_path, int scales, int window) {
    std::vector<std::string> names = image_names(originals_dir);
    if (names.empty()) throw ParameterError("no images found in " + originals_dir);
    std::vector<Image> originals, generated;
    for (const auto& name : names) {
        fs::path gen = fs::path(generated_dir) / name;
        if (!fs::exists(gen)) throw ParameterError("missing generated counterpart for " + name);
        originals.push_back(load_image((fs::path(originals_dir) / name).string()));
        generated.push_back(load_image(gen.string()));
    }
    CwSsimParams params;
    params.scales = scales;
    params.window = window;
    StructureReport report = structure_preservation_report(originals, generated, params);
    write_report_csv(out_csv, report);
    if (!hist_path.empty()) write_score_histogram(hist_path, report);
    double mean_atrous = 0.0, mean_dwt = 0.0;
    for (const auto& r : report.rows) {
        mean_atrous += r.cwssim_atrous;
        mean_dwt += r.cwssim_dwt;
    }
    mean_atrous /= static_cast<double>(report.rows.size());
    mean_dwt /= static_cast<double>(report.rows.size());
    std::cout << "pairs " << report.rows.size() << ", mean cwssim atrous " << mean_atrous
              << ", mean cwssim dwt " << mean_dwt << ", atrous win rate " << report.atrous_win_rate
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"awdiff: a trous wavelet diffusion pipeline"};
    app.require_subcommand(1);

    // phantom
    auto* phantom_cmd = app.add_subcommand("phantom", "Generate a phantom dataset directory");
    std::string phantom_out;
    int phantom_count = 64, phantom_width = 32, phantom_height = 32, phantom_max_blines = 4;
    std::uint64_t phantom_seed = 1;
    double phantom_speckle = 0.08;
    bool phantom_irregular = false;
    phantom_cmd->add_option("--out", phantom_out, "Output dataset directory")->required();
    phantom_cmd->add_option("--count", phantom_count, "Number of phantoms");
    phantom_cmd->add_option("--width", phantom_width, "Image width");
    phantom_cmd->add_option("--height", phantom_height, "Image height");
    phantom_cmd->add_option("--seed", phantom_seed, "Base seed");
    phantom_cmd->add_option("--speckle", phantom_speckle, "Multiplicative speckle sigma");
    phantom_cmd->add_option("--max-blines", phantom_max_blines, "B-line counts cycle 0..max");
    phantom_cmd->add_flag("--irregular", phantom_irregular, "Irregular pleural line");

    // decompose
    auto* decompose_cmd = app.add_subcommand("decompose", "Starlet-decompose an image");
    std::string decompose_in, decompose_out;
    int decompose_scales = 4;
    decompose_cmd->add_option("input", decompose_in, "Input image (.pgm or .awt)")->required();
    decompose_cmd->add_option("outdir", decompose_out, "Output directory")->required();
    decompose_cmd->add_option("--scales", decompose_scales, "Wavelet scales (1-8)");

    // schedule
    auto* schedule_cmd = app.add_subcommand("schedule", "Dump a beta/alpha_bar table");
    int schedule_T = 100;
    double schedule_bs = 1e-4, schedule_be = 0.02;
    std::string schedule_out;
    schedule_cmd->add_option("--T", schedule_T, "Diffusion steps");
    schedule_cmd->add_option("--beta-start", schedule_bs, "First beta");
    schedule_cmd->add_option("--beta-end", schedule_be, "Last beta");
    schedule_cmd->add_option("--out", schedule_out, "Output file (default stdout)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the conditional denoiser");
    std::string train_config, train_data, train_out = "run", train_resume;
    bool train_verbose = false;
    train_cmd->add_option("--config", train_config, "key=value config file (defaults when omitted)");
    train_cmd->add_option("--data", train_data, "Dataset directory")->required();
    train_cmd->add_option("--out", train_out, "Output directory (checkpoints, loss.csv)");
    train_cmd->add_option("--resume", train_resume, "Checkpoint directory to resume from");
    train_cmd->add_flag("--verbose", train_verbose, "Log progress to stderr");
    // Flag overrides, applied on top of the config file.
    long ov_steps = -1;
    int ov_batch = -1, ov_T = -1, ov_scales = -1;
    double ov_lambda1 = -1.0, ov_ema = -1.0, ov_beta_start = -1.0, ov_beta_end = -1.0;
    std::uint64_t ov_seed = 0;
    bool ov_seed_set = false;
    train_cmd->add_option("--steps", ov_steps, "Override optimizer steps");
    train_cmd->add_option("--batch", ov_batch, "Override batch size");
    train_cmd->add_option("--lambda1", ov_lambda1, "Override alignment-loss weight");
    train_cmd->add_option("--ema-decay", ov_ema, "Override EMA decay");
    train_cmd->add_option("--T", ov_T, "Override diffusion steps");
    train_cmd->add_option("--beta-start", ov_beta_start, "Override first beta");
    train_cmd->add_option("--beta-end", ov_beta_end, "Override last beta");
    train_cmd->add_option("--scales", ov_scales, "Override wavelet scales");
    train_cmd->add_option("--seed", ov_seed, "Override training seed")
        ->each([&](const std::string&) { ov_seed_set = true; });

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "Sample images from a checkpoint");
    std::string sample_ckpt, sample_reference, sample_label, sample_embedding, sample_out = "samples";
    std::string sample_variance = "beta";
    int sample_count = 1;
    std::uint64_t sample_seed = 0;
    bool sample_no_ema = false;
    sample_cmd->add_option("--checkpoint", sample_ckpt, "Checkpoint directory")->required();
    sample_cmd
        ->add_option("--reference", sample_reference,
                     "Reference image supplying the wavelet features f")
        ->required();
    sample_cmd->add_option("--label", sample_label, "Label text for the toy text embedding");
    sample_cmd->add_option("--embedding", sample_embedding, "Rank-1 .awt embedding file");
    sample_cmd->add_option("--count", sample_count, "Number of samples");
    sample_cmd->add_option("--seed", sample_seed, "Base seed");
    sample_cmd->add_option("--out", sample_out, "Output directory");
    sample_cmd->add_flag("--no-ema", sample_no_ema, "Use raw weights instead of the EMA shadow");
    sample_cmd->add_option("--variance", sample_variance, "Reverse variance: beta or beta_tilde")
        ->check(CLI::IsMember({"beta", "beta_tilde"}));

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Structure-preservation metrics on paired dirs");
    std::string eval_originals, eval_generated, eval_out = "report.csv", eval_hist = "histogram.txt";
    int eval_scales = 3, eval_window = 7;
    eval_cmd->add_option("--originals", eval_originals, "Directory of reference images")->required();
    eval_cmd->add_option("--generated", eval_generated, "Directory of paired generated images")
        ->required();
    eval_cmd->add_option("--out", eval_out, "Report CSV path");
    eval_cmd->add_option("--hist", eval_hist, "Histogram file path (empty to skip)");
    eval_cmd->add_option("--scales", eval_scales, "CW-SSIM wavelet scales");
    eval_cmd->add_option("--window", eval_window, "CW-SSIM window side");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*phantom_cmd)
            return run_phantom(phantom_out, phantom_count, phantom_width, phantom_height,
                               phantom_seed, phantom_speckle, phantom_max_blines, phantom_irregular);
        if (*decompose_cmd) return run_decompose(decompose_in, decompose_out, decompose_scales);
        if (*schedule_cmd) return run_schedule(schedule_T, schedule_bs, schedule_be, schedule_out);
        if (*train_cmd) {
            TrainOverrides ov;
            ov.steps = ov_steps;
            ov.batch = ov_batch;
            ov.schedule_steps = ov_T;
            ov.scales = ov_scales;
            ov.lambda1 = ov_lambda1;
            ov.ema_decay = ov_ema;
            ov.beta_start = ov_beta_start;
            ov.beta_end = ov_beta_end;
            ov.seed = ov_seed;
            ov.seed_set = ov_seed_set;
            return run_train(train_config, train_data, train_out, train_resume, train_verbose, ov);
        }
        if (*sample_cmd) {
            if (sample_label.empty() == sample_embedding.empty())
                throw ParameterError("provide exactly one of --label or --embedding");
            return run_sample(sample_ckpt, sample_reference, sample_label, sample_embedding,
                              sample_count, sample_seed, sample_out, !sample_no_ema,
                              sample_variance);
        }
        if (*eval_cmd)
            return run_eval(eval_originals, eval_generated, eval_out, eval_hist, eval_scales,
                            eval_window);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
