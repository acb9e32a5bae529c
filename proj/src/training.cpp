#include "awdiff/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "awdiff/parallel.hpp"

namespace fs = std::filesystem;

namespace awdiff {

void TrainingConfig::validate() const {
    if (steps < 0) throw ParameterError("steps must be >= 0");
    if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
    if (lr <= 0.0) throw ParameterError("lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ParameterError("adam betas must lie in [0, 1)");
    if (lambda1 < 0.0) throw ParameterError("lambda1 must be >= 0");
    if (ema_decay < 0.0 || ema_decay >= 1.0) throw ParameterError("ema_decay must lie in [0, 1)");
    if (checkpoint_every < 1) throw ParameterError("checkpoint_every must be >= 1");
    architecture().validate();
    (void)linear_beta_schedule(schedule_steps, beta_start, beta_end);
}

ArchitectureConfig TrainingConfig::architecture() const {
    ArchitectureConfig a;
    a.channels = channels;
    a.kernel_size = kernel_size;
    a.stages = stages;
    a.embed_dim = embed_dim;
    a.wavelet_scales = scales;
    return a;
}

std::string TrainingConfig::to_key_values() const {
    std::ostringstream out;
    out.precision(17);
    out << "steps=" << steps << "\n"
        << "batch_size=" << batch_size << "\n"
        << "lr=" << lr << "\n"
        << "beta1=" << beta1 << "\n"
        << "beta2=" << beta2 << "\n"
        << "adam_eps=" << adam_eps << "\n"
        << "lambda1=" << lambda1 << "\n"
        << "ema_decay=" << ema_decay << "\n"
        << "seed=" << seed << "\n"
        << "T=" << schedule_steps << "\n"
        << "beta_start=" << beta_start << "\n"
        << "beta_end=" << beta_end << "\n"
        << "scales=" << scales << "\n"
        << "channels=" << channels << "\n"
        << "kernel_size=" << kernel_size << "\n"
        << "stages=" << stages << "\n"
        << "embed_dim=" << embed_dim << "\n"
        << "checkpoint_every=" << checkpoint_every << "\n"
        << "align_t_max=" << align_t_max << "\n";
    return out.str();
}

TrainingConfig TrainingConfig::from_key_values(const std::string& text) {
    TrainingConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        auto vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        try {
            if (key == "steps") cfg.steps = std::stol(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "lr") cfg.lr = std::stod(value);
            else if (key == "beta1") cfg.beta1 = std::stod(value);
            else if (key == "beta2") cfg.beta2 = std::stod(value);
            else if (key == "adam_eps") cfg.adam_eps = std::stod(value);
            else if (key == "lambda1") cfg.lambda1 = std::stod(value);
            else if (key == "ema_decay") cfg.ema_decay = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "T") cfg.schedule_steps = std::stoi(value);
            else if (key == "beta_start") cfg.beta_start = std::stod(value);
            else if (key == "beta_end") cfg.beta_end = std::stod(value);
            else if (key == "scales") cfg.scales = std::stoi(value);
            else if (key == "channels") cfg.channels = std::stoi(value);
            else if (key == "kernel_size") cfg.kernel_size = std::stoi(value);
            else if (key == "stages") cfg.stages = std::stoi(value);
            else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
            else if (key == "checkpoint_every") cfg.checkpoint_every = std::stol(value);
            else if (key == "align_t_max") cfg.align_t_max = std::stoi(value);
            else throw FormatError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError("config line " + std::to_string(line_no) + ": bad value for '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrainingConfig TrainingConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_key_values(buf.str());
}

bool TrainingConfig::compatible_with(const TrainingConfig& other) const {
    TrainingConfig a = *this, b = other;
    a.steps = b.steps = 0;
    return a.to_key_values() == b.to_key_values();
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

namespace {

DatasetItem make_item(Image img, const std::string& label, int scales,
                      const ConditioningEmbedding& z_y) {
    DatasetItem item;
    item.features = starlet_decompose(img, scales);
    Image rec = starlet_reconstruct(item.features);
    for (std::size_t i = 0; i < img.size(); ++i)
        if (std::abs(rec.pixels()[i] - img.pixels()[i]) > 1e-10)
            throw InvariantError("cached pyramid does not reconstruct its image");
    item.image = std::move(img);
    item.label = LabelPrompt{label};
    item.label.validate();
    item.z_y = z_y;
    return item;
}

} // namespace

Dataset Dataset::from_labeled_images(const std::vector<std::pair<Image, std::string>>& pairs,
                                     int scales, int embed_dim) {
    if (pairs.empty()) throw ParameterError("dataset is empty");
    Dataset ds;
    ds.items.reserve(pairs.size());
    for (const auto& [img, label] : pairs) {
        if (!ds.items.empty() && !img.same_shape(ds.items.front().image))
            throw InvariantError("dataset images must share dimensions");
        ConditioningEmbedding z = toy_text_embed(LabelPrompt{label}, embed_dim);
        ds.items.push_back(make_item(img, label, scales, z));
    }
    return ds;
}

Dataset Dataset::load(const std::string& dir, int scales, int embed_dim) {
    const fs::path root(dir);
    const fs::path labels_path = root / "labels.tsv";
    std::ifstream labels(labels_path);
    if (!labels) throw IoError("cannot open " + labels_path.string());

    // Optional external-embedding manifest: label TAB tensor path.
    std::map<std::string, std::string> embedding_paths;
    const fs::path manifest_path = root / "embeddings" / "manifest.tsv";
    if (fs::exists(manifest_path)) {
        std::ifstream manifest(manifest_path);
        std::string line;
        while (std::getline(manifest, line)) {
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw FormatError("embeddings manifest: expected label TAB path");
            embedding_paths[line.substr(0, tab)] = line.substr(tab + 1);
        }
    }

    Dataset ds;
    std::string line;
    int line_no = 0;
    while (std::getline(labels, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatError("labels.tsv line " + std::to_string(line_no) + ": expected filename TAB label");
        std::string filename = line.substr(0, tab);
        std::string label = line.substr(tab + 1);
        Image img = load_image((root / "images" / filename).string());
        if (!ds.items.empty() && !img.same_shape(ds.items.front().image))
            throw InvariantError("dataset images must share dimensions");
        ConditioningEmbedding z;
        if (auto it = embedding_paths.find(label); it != embedding_paths.end())
            z = load_external_embedding((root / it->second).string(), embed_dim);
        else
            z = toy_text_embed(LabelPrompt{label}, embed_dim);
        ds.items.push_back(make_item(std::move(img), label, scales, z));
    }
    if (ds.items.empty()) throw ParameterError("dataset is empty: " + dir);
    return ds;
}

// ---------------------------------------------------------------------------
// Losses and steps
// ---------------------------------------------------------------------------

double mse_loss(const Image& eps, const Image& eps_pred) {
    if (!eps.same_shape(eps_pred)) throw InvariantError("mse_loss: dims differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        double d = eps.pixels()[i] - eps_pred.pixels()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(eps.size());
}

StepMetrics training_step(DenoiserParams& params, ParamSet& ema, AdamState& opt_state,
                          const std::vector<const DatasetItem*>& batch, const NoiseSchedule& sched,
                          const TrainingConfig& cfg, const ToyImageEmbedder& embedder,
                          SeededRng& rng) {
    if (batch.empty()) throw ParameterError("empty batch");
    const std::size_t n = batch.size();

    // All stochastic draws happen up front in example order, so the stream
    // is identical whether the per-example work below runs serially or not.
    std::vector<int> ts(n);
    std::vector<Image> eps_fields;
    eps_fields.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(sched.steps));
        eps_fields.push_back(
            standard_normal_field(rng, batch[i]->image.width(), batch[i]->image.height()));
    }

    struct ExampleResult {
        ParamSet grads;
        double mse = 0.0;
        double align = 0.0;
    };
    std::vector<ExampleResult> results(n);

    parallel_for(n, [&](std::size_t i) {
        const DatasetItem& item = *batch[i];
        const int t = ts[i];
        const Image& eps = eps_fields[i];
        Image x_t = forward_marginal(item.image, t, eps, sched);
        DenoiserEval eval(params, x_t, t, item.z_y, item.features);
        const Image& eps_pred = eval.output();

        Image upstream(eps.width(), eps.height());
        const double inv_count = 1.0 / static_cast<double>(eps.size());
        for (std::size_t j = 0; j < eps.size(); ++j)
            upstream.pixels()[j] = 2.0 * inv_count * (eps_pred.pixels()[j] - eps.pixels()[j]);

        results[i].mse = mse_loss(eps, eps_pred);

        const bool apply_align =
            cfg.lambda1 > 0.0 && (cfg.align_t_max == 0 || t <= cfg.align_t_max);
        if (apply_align) {
            Image x0_hat = predict_x0(x_t, t, eps_pred, sched);
            ConditioningEmbedding z_img = embedder.embed(x0_hat);
            results[i].align = cosine_alignment_loss(z_img, item.z_y);
            std::vector<double> dz = cosine_alignment_loss_grad(z_img, item.z_y);
            Image dx0 = embedder.pixel_grad(x0_hat, dz);
            // d x0_hat / d eps_pred is the diagonal -sqrt(1-ab)/sqrt(ab).
            const double chain = -std::sqrt(1.0 - sched.alpha_bar(t)) / std::sqrt(sched.alpha_bar(t));
            for (std::size_t j = 0; j < upstream.size(); ++j)
                upstream.pixels()[j] += cfg.lambda1 * chain * dx0.pixels()[j];
        }
        results[i].grads = eval.backward(upstream);
    });

    // Ordered reduction keeps training bitwise reproducible.
    ParamSet grad_avg = std::move(results[0].grads);
    for (std::size_t i = 1; i < n; ++i) grad_avg.scale_add(1.0, results[i].grads, 1.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& block : grad_avg.blocks)
        for (auto& v : block.values) v *= inv_n;

    StepMetrics metrics;
    for (const auto& r : results) {
        metrics.mse += r.mse;
        metrics.align += r.align;
    }
    metrics.mse *= inv_n;
    metrics.align *= inv_n;
    metrics.total = metrics.mse + cfg.lambda1 * metrics.align;
    if (!std::isfinite(metrics.total))
        throw DivergenceError("non-finite training loss");

    adam_step(params.set, grad_avg, opt_state, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    ema_update(ema, params.set, cfg.ema_decay);
    return metrics;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
    fs::create_directories(dir);
    {
        std::ofstream cfg_out(fs::path(dir) / "config.txt");
        if (!cfg_out) throw IoError("cannot write checkpoint config in " + dir);
        cfg_out << ckpt.config.to_key_values();
    }
    {
        std::ofstream state(fs::path(dir) / "state.txt");
        if (!state) throw IoError("cannot write checkpoint state in " + dir);
        state << "step=" << ckpt.step << "\n";
        state << "adam_step=" << ckpt.adam.step << "\n";
        state << "rng=" << ckpt.rng_state[0] << " " << ckpt.rng_state[1] << " " << ckpt.rng_state[2]
              << " " << ckpt.rng_state[3] << "\n";
    }
    const std::string stem = (fs::path(dir) / "model").string();
    ckpt.params.set.save(stem);
    ckpt.ema.save(stem + ".ema");
    ckpt.adam.m.save((fs::path(dir) / "adam_m").string());
    ckpt.adam.v.save((fs::path(dir) / "adam_v").string());
}

Checkpoint load_checkpoint(const std::string& dir) {
    Checkpoint ckpt;
    ckpt.config = TrainingConfig::from_file((fs::path(dir) / "config.txt").string());
    {
        std::ifstream state(fs::path(dir) / "state.txt");
        if (!state) throw IoError("cannot open checkpoint state in " + dir);
        std::string line;
        while (std::getline(state, line)) {
            if (line.rfind("step=", 0) == 0) ckpt.step = std::stol(line.substr(5));
            else if (line.rfind("adam_step=", 0) == 0) ckpt.adam.step = std::stol(line.substr(10));
            else if (line.rfind("rng=", 0) == 0) {
                std::istringstream ss(line.substr(4));
                for (auto& w : ckpt.rng_state)
                    if (!(ss >> w)) throw FormatError("bad rng state in checkpoint");
            }
        }
    }
    const std::string stem = (fs::path(dir) / "model").string();
    ckpt.params.arch = ckpt.config.architecture();
    ckpt.params.set = ParamSet::load(stem);
    ckpt.ema = ParamSet::load(stem + ".ema");
    ckpt.adam.m = ParamSet::load((fs::path(dir) / "adam_m").string());
    ckpt.adam.v = ParamSet::load((fs::path(dir) / "adam_v").string());
    return ckpt;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);
    out << "step,total,mse,align\n";
    for (const auto& r : rows)
        out << r.step << "," << r.total << "," << r.mse << "," << r.align << "\n";
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

std::string checkpoint_name(long step) {
    std::ostringstream name;
    name << "checkpoint_";
    name.width(8);
    name.fill('0');
    name << step;
    return name.str();
}

} // namespace

TrainResult train(const Dataset& dataset, const TrainingConfig& cfg, const TrainOptions& options) {
    cfg.validate();
    if (dataset.size() == 0) throw ParameterError("dataset is empty");
    for (const auto& item : dataset.items) {
        if (item.features.scales() != cfg.scales)
            throw InvariantError("dataset pyramids disagree with configured scales");
        if (item.z_y.dim() != cfg.embed_dim)
            throw InvariantError("dataset embeddings disagree with configured embed_dim");
    }

    const NoiseSchedule sched = cfg.schedule();
    const ToyImageEmbedder embedder(cfg.embed_dim);

    DenoiserParams params;
    ParamSet ema;
    AdamState adam;
    SeededRng rng(cfg.seed);
    long start_step = 0;

    if (!options.resume_checkpoint.empty()) {
        Checkpoint ckpt = load_checkpoint(options.resume_checkpoint);
        if (!ckpt.config.compatible_with(cfg))
            throw ParameterError("resume checkpoint config differs from the requested config");
        params = std::move(ckpt.params);
        ema = std::move(ckpt.ema);
        adam.m = std::move(ckpt.adam.m);
        adam.v = std::move(ckpt.adam.v);
        adam.step = ckpt.adam.step;
        rng = SeededRng::from_state(ckpt.rng_state);
        start_step = ckpt.step;
    } else {
        params = init_params(cfg.architecture(), rng);
        ema = params.set;
        adam = make_adam_state(params);
    }

    TrainResult result;
    result.curve.reserve(static_cast<std::size_t>(std::max<long>(0, cfg.steps - start_step)));

    auto checkpoint_now = [&](long step) {
        if (options.out_dir.empty()) return;
        Checkpoint ckpt;
        ckpt.config = cfg;
        ckpt.step = step;
        ckpt.rng_state = rng.state();
        ckpt.params = params;
        ckpt.ema = ema;
        ckpt.adam = adam;
        save_checkpoint((fs::path(options.out_dir) / checkpoint_name(step)).string(), ckpt);
    };

    for (long step = start_step + 1; step <= cfg.steps; ++step) {
        std::vector<const DatasetItem*> batch(cfg.batch_size);
        for (int i = 0; i < cfg.batch_size; ++i)
            batch[i] = &dataset.items[rng.next_u64() % dataset.size()];
        StepMetrics metrics;
        try {
            metrics = training_step(params, ema, adam, batch, sched, cfg, embedder, rng);
        } catch (const DivergenceError& e) {
            // Checkpoints written so far stay on disk as the last good state.
            throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(step));
        }
        result.curve.push_back({step, metrics.total, metrics.mse, metrics.align});
        if (options.verbose && (step % 100 == 0 || step == cfg.steps))
            std::cerr << "step " << step << " total " << metrics.total << " mse " << metrics.mse
                      << " align " << metrics.align << "\n";
        if (step % cfg.checkpoint_every == 0 && step != cfg.steps) checkpoint_now(step);
    }
    checkpoint_now(cfg.steps);

    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        write_loss_csv((fs::path(options.out_dir) / "loss.csv").string(), result.curve);
    }

    result.params = std::move(params);
    result.ema = std::move(ema);
    return result;
}

} // namespace awdiff
