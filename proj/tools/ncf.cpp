// Command-line front end: dataset generation, training, evaluation, and color
// transfer. Every run writes a manifest echoing the fully resolved flags so a
// run directory is self-describing; identical flags and seed reproduce every
// artifact byte for byte (NCF_THREADS only parallelizes per-row evaluation).
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncf/data.hpp"
#include "ncf/eval.hpp"
#include "ncf/gaussian.hpp"
#include "ncf/image.hpp"
#include "ncf/losses.hpp"
#include "ncf/model.hpp"
#include "ncf/train.hpp"
#include "ncf/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Decorrelates the pool-sampling stream from the training stream, which also
// starts from --seed.
std::uint64_t data_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

struct ArchFlags {
    std::vector<int> hidden;
    std::string act = "softplus";
    double beta = 100.0;
    double kappa = 0.0;
    bool quad_input = false;
};

struct TrainFlags {
    int epochs = 0;
    double lr = 1e-3;
    double lr_final = 0.0;
    std::size_t n_colloc = 1000;
    std::size_t n_mmd = 750;
    std::size_t pool = 50000;
    double tf = 1.0;
    double margin = 0.05;
    std::uint64_t seed = 0;
    double w_hj_f = 1.0, w_hj_b = 1.0, w_mmd_f = 1.0, w_mmd_b = 1.0;
    std::string backward_mode = "horizon";
    std::string out;
};

void add_arch_flags(CLI::App* cmd, ArchFlags& a) {
    cmd->add_option("--hidden", a.hidden, "hidden layer widths")->delimiter(',');
    cmd->add_option("--act", a.act, "activation")->check(CLI::IsMember({"softplus", "tanh"}));
    cmd->add_option("--beta", a.beta, "softplus sharpness");
    cmd->add_option("--kappa", a.kappa, "residual block scale (0 = plain MLP)");
    cmd->add_flag("--quad-input,!--no-quad-input", a.quad_input, "append |x|^2 input feature");
}

void add_train_flags(CLI::App* cmd, TrainFlags& t) {
    cmd->add_option("--epochs", t.epochs, "training epochs (see README for desk-scale defaults)")
        ->required()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lr", t.lr, "Adam learning rate");
    cmd->add_option("--lr-final", t.lr_final, "cosine-decay the rate down to this (0 = flat)");
    cmd->add_option("--colloc", t.n_colloc, "collocation points per epoch");
    cmd->add_option("--mmd-batch", t.n_mmd, "sample batch per epoch and side");
    cmd->add_option("--pool", t.pool, "samples drawn per distribution");
    cmd->add_option("--tf", t.tf, "transport horizon");
    cmd->add_option("--margin", t.margin, "collocation box margin");
    cmd->add_option("--seed", t.seed, "run seed");
    cmd->add_option("--w-hj-f", t.w_hj_f, "forward residual weight");
    cmd->add_option("--w-hj-b", t.w_hj_b, "backward residual weight");
    cmd->add_option("--w-mmd-f", t.w_mmd_f, "forward distribution weight");
    cmd->add_option("--w-mmd-b", t.w_mmd_b, "backward distribution weight");
    cmd->add_option("--backward-mode", t.backward_mode, "backward residual time anchor")
        ->check(CLI::IsMember({"horizon", "literal"}));
    cmd->add_option("--out", t.out, "output directory")->required();
}

ncf::TrainConfig to_config(const TrainFlags& t, bool class_conditional) {
    ncf::TrainConfig cfg;
    cfg.epochs = t.epochs;
    cfg.lr = t.lr;
    cfg.lr_final = t.lr_final;
    cfg.n_colloc = t.n_colloc;
    cfg.n_mmd = t.n_mmd;
    cfg.tf = t.tf;
    cfg.margin = t.margin;
    cfg.seed = t.seed;
    cfg.weights = {t.w_hj_f, t.w_hj_b, t.w_mmd_f, t.w_mmd_b};
    cfg.class_conditional = class_conditional;
    cfg.backward_mode = t.backward_mode == "literal" ? ncf::BackwardTimeMode::Literal
                                                     : ncf::BackwardTimeMode::Horizon;
    return cfg;
}

ncf::MlpPotential make_model(int dim, const ArchFlags& a, std::uint64_t seed) {
    ncf::Activation act{a.act == "tanh" ? ncf::Act::Tanh : ncf::Act::Softplus, a.beta};
    return ncf::mlp_init(dim, a.hidden, act, a.kappa, a.quad_input, seed);
}

json arch_json(const ArchFlags& a) {
    return json{{"hidden", a.hidden},
                {"act", a.act},
                {"beta", a.beta},
                {"kappa", a.kappa},
                {"quad_input", a.quad_input}};
}

json train_json(const TrainFlags& t) {
    return json{{"epochs", t.epochs},
                {"lr", t.lr},
                {"lr_final", t.lr_final},
                {"colloc", t.n_colloc},
                {"mmd_batch", t.n_mmd},
                {"pool", t.pool},
                {"tf", t.tf},
                {"margin", t.margin},
                {"seed", t.seed},
                {"weights", {{"hj_f", t.w_hj_f}, {"hj_b", t.w_hj_b}, {"mmd_f", t.w_mmd_f}, {"mmd_b", t.w_mmd_b}}},
                {"backward_mode", t.backward_mode},
                {"out", t.out}};
}

void write_manifest(const std::string& dir, const std::string& name, const json& j) {
    std::ofstream f(dir + "/" + name);
    if (!f) throw std::runtime_error("cannot write manifest in " + dir);
    f << j.dump(2) << "\n";
}

ncf::SampleSet dataset_or_csv(const std::string& name, std::size_t n, ncf::Rng& rng) {
    if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") return ncf::load_points_csv(name);
    return ncf::sample_named(name, n, rng);
}

ncf::SampleSet head_rows(const ncf::SampleSet& s, std::size_t n) {
    if (s.size() <= n) return s;
    ncf::SampleSet out;
    out.dim = s.dim;
    out.norm = s.norm;
    out.points.assign(s.points.begin(), s.points.begin() + static_cast<std::ptrdiff_t>(n * s.dim));
    if (!s.labels.empty()) out.labels.assign(s.labels.begin(), s.labels.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

ncf::Checkpoint make_checkpoint(const ncf::MlpPotential& model, const TrainFlags& t,
                                const ncf::Normalization& frame,
                                std::map<std::string, std::string> extra) {
    ncf::Checkpoint ck;
    ck.model = model;
    ck.tf = t.tf;
    ck.cost = "quadratic";
    ck.src_norm = frame;
    ck.tgt_norm = frame;
    ck.extra = std::move(extra);
    return ck;
}

/// Training-frame metrics shared by the 2-D flavors: distribution match both
/// ways on a held-out slice plus the round-trip diagnostic.
void common_metrics(std::vector<ncf::MetricRow>& rows, const ncf::MlpPotential& model,
                    const ncf::CostModel& cost, double tf, const ncf::SampleSet& src,
                    const ncf::SampleSet& tgt, std::size_t cap) {
    const ncf::Potential pot = model;
    ncf::SampleSet s = head_rows(src, cap), g = head_rows(tgt, cap);
    ncf::SampleSet fwd = s, bwd = g;
    fwd.points = ncf::transport_points(pot, cost, ncf::MapDirection::Forward, tf, s.points);
    bwd.points = ncf::transport_points(pot, cost, ncf::MapDirection::Backward, tf, g.points);
    rows.push_back({"mmd_sq", "forward", ncf::mmd_sq(fwd, g)});
    rows.push_back({"mmd_sq", "backward", ncf::mmd_sq(s, bwd)});
    rows.push_back({"round_trip", "both", ncf::round_trip_error(pot, cost, tf, s)});
}

void loss_metrics(std::vector<ncf::MetricRow>& rows, const ncf::FitResult& fr) {
    const ncf::LossValues& last = fr.history.back();
    rows.push_back({"loss_total", "final", last.total});
    rows.push_back({"loss_hj_f", "final", last.hj_f});
    rows.push_back({"loss_hj_b", "final", last.hj_b});
    rows.push_back({"loss_mmd_f", "final", last.mmd_f});
    rows.push_back({"loss_mmd_b", "final", last.mmd_b});
}

void write_transport_svg(const std::string& path, const ncf::SampleSet& src,
                         const ncf::SampleSet& tgt, const ncf::SampleSet& fwd, std::size_t cap) {
    if (src.dim != 2) return;
    const ncf::SampleSet s = head_rows(src, cap), g = head_rows(tgt, cap), f = head_rows(fwd, cap);
    ncf::SvgSegments seg;
    seg.from = s.points;
    seg.to = f.points;
    ncf::save_svg_scatter(path,
                          {{&g, "#e07030", 1.5}, {&s, "#4682b4", 1.5}, {&f, "#2e8b57", 1.5}}, &seg);
}

// ---- subcommands ------------------------------------------------------------

int run_train_2d(const std::string& source, const std::string& target, const ArchFlags& arch,
                 const TrainFlags& tf, bool class_conditional, const char* command) {
    fs::create_directories(tf.out);
    ncf::Rng data_rng(data_seed(tf.seed));
    const ncf::SampleSet src_raw = dataset_or_csv(source, tf.pool, data_rng);
    const ncf::SampleSet tgt_raw = dataset_or_csv(target, tf.pool, data_rng);
    if (src_raw.dim != tgt_raw.dim)
        throw std::runtime_error("source and target dimension differ");

    const ncf::Normalization frame = ncf::pooled_isotropic_norm({&src_raw, &tgt_raw});
    const ncf::SampleSet src = ncf::apply_frame(src_raw, frame);
    const ncf::SampleSet tgt = ncf::apply_frame(tgt_raw, frame);

    ncf::MlpPotential model = make_model(src.dim, arch, tf.seed);
    const ncf::CostModel cost = ncf::CostModel::quadratic();
    const ncf::FitResult fr = ncf::fit(model, src, tgt, cost, to_config(tf, class_conditional));

    ncf::save_checkpoint(tf.out + "/model.ncf",
                         make_checkpoint(model, tf, frame,
                                         {{"command", command}, {"source", source}, {"target", target}}));
    ncf::save_loss_history(tf.out + "/loss_history.csv", fr.history);

    std::vector<ncf::MetricRow> rows;
    common_metrics(rows, model, cost, tf.tf, src, tgt, 2000);
    if (class_conditional) {
        ncf::SampleSet s = head_rows(src, 2000), g = head_rows(tgt, 2000);
        ncf::SampleSet fwd = s;
        fwd.points = ncf::transport_points(model, cost, ncf::MapDirection::Forward, tf.tf, s.points);
        rows.push_back({"mmd_sq_classwise", "forward", ncf::mmd_sq_classwise(fwd, g)});
    }
    loss_metrics(rows, fr);
    ncf::save_metrics_csv(tf.out + "/metrics.csv", rows);

    ncf::SampleSet src_plot = head_rows(src_raw, 1500);
    ncf::SampleSet fwd_plot =
        ncf::pushforward(src_plot, model, cost, ncf::MapDirection::Forward, tf.tf, frame, frame);
    write_transport_svg(tf.out + "/transport.svg", src_plot, head_rows(tgt_raw, 1500), fwd_plot, 1500);
    ncf::save_points_csv(tf.out + "/points_source.csv", src_plot);
    ncf::save_points_csv(tf.out + "/points_target.csv", head_rows(tgt_raw, 1500));
    ncf::save_points_csv(tf.out + "/points_mapped.csv", fwd_plot);

    json manifest = {{"command", command},
                     {"source", source},
                     {"target", target},
                     {"class_conditional", class_conditional},
                     {"arch", arch_json(arch)},
                     {"train", train_json(tf)}};
    write_manifest(tf.out, "manifest.json", manifest);
    std::cout << "final_loss=" << ncf::format_full(fr.history.back().total) << "\n";
    return 0;
}

int run_train_gaussian(int dim, std::uint64_t pair_seed, const ArchFlags& arch,
                       const TrainFlags& tf) {
    fs::create_directories(tf.out);
    const ncf::GaussianPair gp = ncf::random_gaussian_pair(dim, pair_seed);
    ncf::Rng data_rng(data_seed(tf.seed));
    const ncf::SampleSet src_raw = ncf::sample_gaussian(gp, ncf::Marginal::Mu, tf.pool, data_rng);
    const ncf::SampleSet tgt_raw = ncf::sample_gaussian(gp, ncf::Marginal::Nu, tf.pool, data_rng);

    const ncf::Normalization frame = ncf::pooled_isotropic_norm({&src_raw, &tgt_raw});
    const ncf::SampleSet src = ncf::apply_frame(src_raw, frame);
    const ncf::SampleSet tgt = ncf::apply_frame(tgt_raw, frame);

    ncf::MlpPotential model = make_model(dim, arch, tf.seed);
    const ncf::CostModel cost = ncf::CostModel::quadratic();
    const ncf::FitResult fr = ncf::fit(model, src, tgt, cost, to_config(tf, false));

    ncf::save_checkpoint(tf.out + "/model.ncf",
                         make_checkpoint(model, tf, frame,
                                         {{"command", "train-gaussian"},
                                          {"dim", std::to_string(dim)},
                                          {"pair_seed", std::to_string(pair_seed)}}));
    ncf::save_gaussian_pair(tf.out + "/pair.csv", gp);
    ncf::save_loss_history(tf.out + "/loss_history.csv", fr.history);

    json manifest = {{"command", "train-gaussian"},
                     {"dim", dim},
                     {"pair_seed", pair_seed},
                     {"arch", arch_json(arch)},
                     {"train", train_json(tf)}};
    write_manifest(tf.out, "manifest.json", manifest);
    std::cout << "final_loss=" << ncf::format_full(fr.history.back().total) << "\n";
    return 0;
}

/// Forward map in raw coordinates: frame in, characteristic step, frame out.
std::function<void(const double*, double*)> raw_forward_map(const ncf::Checkpoint& ck,
                                                            const ncf::CostModel& cost,
                                                            const ncf::Potential& pot) {
    const int d = ck.model.dim;
    return [&ck, &cost, &pot, d](const double* x, double* y) {
        std::vector<double> f(static_cast<std::size_t>(d)), m(static_cast<std::size_t>(d));
        ncf::to_frame(ck.src_norm, x, f.data(), d);
        ncf::transport_point(pot, cost, ncf::MapDirection::Forward, ck.tf, f.data(), m.data());
        ncf::from_frame(ck.tgt_norm, m.data(), y, d);
    };
}

int run_eval_uvp(const std::string& ckpt, std::string pair_path, std::size_t n,
                 std::uint64_t seed, std::string out) {
    const ncf::Checkpoint ck = ncf::load_checkpoint(ckpt);
    const std::string dir = fs::path(ckpt).parent_path().string();
    if (pair_path.empty()) pair_path = (fs::path(dir) / "pair.csv").string();
    if (out.empty()) out = dir.empty() ? "." : dir;
    fs::create_directories(out);
    const ncf::GaussianPair gp = ncf::load_gaussian_pair(pair_path);
    const ncf::CostModel cost = ncf::cost_from_name(ck.cost);
    const ncf::Potential pot = ck.model;

    const double v = ncf::uvp(raw_forward_map(ck, cost, pot), gp, n, seed);
    std::cout << "uvp=" << ncf::format_full(v) << "\n";
    ncf::save_metrics_csv(out + "/metrics-uvp.csv", {{"uvp", "forward", v}});
    write_manifest(out, "manifest-eval-uvp.json",
                   {{"command", "eval-uvp"}, {"ckpt", ckpt}, {"pair", pair_path}, {"n", n}, {"seed", seed}});
    return 0;
}

int run_eval_roundtrip(const std::string& ckpt, std::string pair_path, const std::string& dataset,
                       const std::string& points, std::size_t n, std::uint64_t seed,
                       std::string out) {
    const ncf::Checkpoint ck = ncf::load_checkpoint(ckpt);
    const std::string dir = fs::path(ckpt).parent_path().string();
    if (out.empty()) out = dir.empty() ? "." : dir;
    fs::create_directories(out);

    ncf::Rng rng(seed);
    ncf::SampleSet raw;
    if (!points.empty()) {
        raw = ncf::load_points_csv(points);
    } else if (!dataset.empty()) {
        raw = ncf::sample_named(dataset, n, rng);
    } else {
        if (pair_path.empty()) pair_path = (fs::path(dir) / "pair.csv").string();
        raw = ncf::sample_gaussian(ncf::load_gaussian_pair(pair_path), ncf::Marginal::Mu, n, rng);
    }

    ncf::SampleSet frame_pts = ncf::apply_frame(raw, ck.src_norm);
    const ncf::CostModel cost = ncf::cost_from_name(ck.cost);
    const double v = ncf::round_trip_error(ck.model, cost, ck.tf, frame_pts);
    std::cout << "round_trip=" << ncf::format_full(v) << "\n";
    ncf::save_metrics_csv(out + "/metrics-roundtrip.csv", {{"round_trip", "both", v}});
    write_manifest(out, "manifest-eval-roundtrip.json",
                   {{"command", "eval-roundtrip"},
                    {"ckpt", ckpt},
                    {"pair", pair_path},
                    {"dataset", dataset},
                    {"points", points},
                    {"n", n},
                    {"seed", seed}});
    return 0;
}

int run_export_points(const std::string& dataset, std::size_t n, std::uint64_t seed,
                      const std::string& out) {
    ncf::Rng rng(seed);
    const ncf::SampleSet s = ncf::sample_named(dataset, n, rng);
    if (const fs::path parent = fs::path(out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    ncf::save_points_csv(out, s);
    std::cout << "wrote " << s.size() << " points to " << out << "\n";
    return 0;
}

int run_color_transfer(const std::string& source, const std::string& target,
                       const ArchFlags& arch, const TrainFlags& tf) {
    fs::create_directories(tf.out);
    const ncf::Image src_img = ncf::load_ppm(source);
    const ncf::Image tgt_img = ncf::load_ppm(target);
    const ncf::SampleSet src_raw = ncf::image_to_cloud(src_img);
    const ncf::SampleSet tgt_raw = ncf::image_to_cloud(tgt_img);

    const ncf::Normalization frame = ncf::pooled_isotropic_norm({&src_raw, &tgt_raw});
    ncf::SampleSet src = ncf::apply_frame(src_raw, frame);
    ncf::SampleSet tgt = ncf::apply_frame(tgt_raw, frame);
    if (tf.pool < src.size()) src = head_rows(src, tf.pool);
    if (tf.pool < tgt.size()) tgt = head_rows(tgt, tf.pool);

    ncf::MlpPotential model = make_model(3, arch, tf.seed);
    const ncf::CostModel cost = ncf::CostModel::quadratic();
    const ncf::FitResult fr = ncf::fit(model, src, tgt, cost, to_config(tf, false));

    const ncf::SampleSet fwd_cloud =
        ncf::pushforward(src_raw, model, cost, ncf::MapDirection::Forward, tf.tf, frame, frame);
    const ncf::SampleSet bwd_cloud =
        ncf::pushforward(tgt_raw, model, cost, ncf::MapDirection::Backward, tf.tf, frame, frame);
    const ncf::Image fwd_img = ncf::cloud_to_image(fwd_cloud, src_img.width, src_img.height);
    const ncf::Image bwd_img = ncf::cloud_to_image(bwd_cloud, tgt_img.width, tgt_img.height);
    ncf::save_ppm(tf.out + "/forward.ppm", fwd_img);
    ncf::save_ppm(tf.out + "/backward.ppm", bwd_img);

    ncf::save_checkpoint(tf.out + "/model.ncf",
                         make_checkpoint(model, tf, frame,
                                         {{"command", "color-transfer"},
                                          {"source", source},
                                          {"target", target}}));
    ncf::save_loss_history(tf.out + "/loss_history.csv", fr.history);

    std::vector<ncf::MetricRow> rows;
    rows.push_back({"emd", "forward", ncf::emd_images(fwd_img, tgt_img)});
    rows.push_back({"emd", "backward", ncf::emd_images(bwd_img, src_img)});
    rows.push_back({"emd", "baseline", ncf::emd_images(src_img, tgt_img)});
    rows.push_back({"hist_intersection", "forward", ncf::hist_intersection_images(fwd_img, tgt_img)});
    rows.push_back({"hist_intersection", "backward", ncf::hist_intersection_images(bwd_img, src_img)});
    rows.push_back({"hist_intersection", "baseline", ncf::hist_intersection_images(src_img, tgt_img)});
    loss_metrics(rows, fr);
    ncf::save_metrics_csv(tf.out + "/metrics.csv", rows);

    json manifest = {{"command", "color-transfer"},
                     {"source", source},
                     {"target", target},
                     {"arch", arch_json(arch)},
                     {"train", train_json(tf)}};
    write_manifest(tf.out, "manifest.json", manifest);
    std::cout << "emd_forward=" << ncf::format_full(rows[0].value)
              << " emd_baseline=" << ncf::format_full(rows[2].value) << "\n";
    return 0;
}

int run_ablate_lambda(const std::string& source, const std::string& target,
                      const std::vector<std::string>& lambdas, const ArchFlags& arch,
                      const TrainFlags& base) {
    fs::create_directories(base.out);
    ncf::Rng data_rng(data_seed(base.seed));
    const ncf::SampleSet src_raw = dataset_or_csv(source, base.pool, data_rng);
    const ncf::SampleSet tgt_raw = dataset_or_csv(target, base.pool, data_rng);
    const ncf::Normalization frame = ncf::pooled_isotropic_norm({&src_raw, &tgt_raw});
    const ncf::SampleSet src = ncf::apply_frame(src_raw, frame);
    const ncf::SampleSet tgt = ncf::apply_frame(tgt_raw, frame);
    const ncf::CostModel cost = ncf::CostModel::quadratic();

    std::ofstream summary(base.out + "/summary.csv");
    if (!summary) throw std::runtime_error("cannot write " + base.out + "/summary.csv");
    summary << "lambda,w_hj,loss_total,loss_hj_f,loss_hj_b,loss_mmd_f,loss_mmd_b,mmd_sq_forward,"
               "round_trip\n";

    for (const std::string& ls : lambdas) {
        const bool infinite = ls == "inf";
        const double lambda = infinite ? 0.0 : std::strtod(ls.c_str(), nullptr);
        if (!infinite && !(lambda > 0.0))
            throw std::runtime_error("ablate-lambda: bad lambda value '" + ls + "'");
        const double w_hj = infinite ? 0.0 : 1.0 / lambda;

        TrainFlags tf = base;
        tf.w_hj_f = w_hj;
        tf.w_hj_b = w_hj;
        tf.w_mmd_f = 1.0;
        tf.w_mmd_b = 1.0;
        tf.out = base.out + "/lambda_" + ls;
        fs::create_directories(tf.out);

        ncf::MlpPotential model = make_model(src.dim, arch, tf.seed);
        const ncf::FitResult fr = ncf::fit(model, src, tgt, cost, to_config(tf, false));

        ncf::save_checkpoint(tf.out + "/model.ncf",
                             make_checkpoint(model, tf, frame,
                                             {{"command", "ablate-lambda"},
                                              {"lambda", ls},
                                              {"source", source},
                                              {"target", target}}));
        ncf::save_loss_history(tf.out + "/loss_history.csv", fr.history);

        std::vector<ncf::MetricRow> rows;
        common_metrics(rows, model, cost, tf.tf, src, tgt, 2000);
        loss_metrics(rows, fr);
        ncf::save_metrics_csv(tf.out + "/metrics.csv", rows);

        const ncf::LossValues& last = fr.history.back();
        summary << ls << "," << ncf::format_full(w_hj) << "," << ncf::format_full(last.total)
                << "," << ncf::format_full(last.hj_f) << "," << ncf::format_full(last.hj_b) << ","
                << ncf::format_full(last.mmd_f) << "," << ncf::format_full(last.mmd_b) << ","
                << ncf::format_full(rows[0].value) << "," << ncf::format_full(rows[2].value) << "\n";
        std::cout << "lambda=" << ls << " mmd_sq_forward=" << ncf::format_full(rows[0].value)
                  << "\n";
    }
    if (!summary) throw std::runtime_error("write failed: " + base.out + "/summary.csv");

    json manifest = {{"command", "ablate-lambda"},
                     {"source", source},
                     {"target", target},
                     {"lambdas", lambdas},
                     {"arch", arch_json(arch)},
                     {"train", train_json(base)}};
    write_manifest(base.out, "manifest.json", manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidirectional optimal-transport maps from one space-time potential"};
    app.require_subcommand(1);

    // train-2d ---------------------------------------------------------------
    auto* c2d = app.add_subcommand("train-2d", "train on 2-D point clouds");
    std::string s2d_src = "swiss_roll", s2d_tgt = "double_moons";
    ArchFlags a2d;
    a2d.hidden = {64, 64, 64, 64, 64};
    TrainFlags t2d;
    bool cc2d = false;
    c2d->add_option("--source", s2d_src, "dataset name or points csv");
    c2d->add_option("--target", s2d_tgt, "dataset name or points csv");
    c2d->add_flag("--class-conditional", cc2d, "match distributions per class label");
    add_arch_flags(c2d, a2d);
    add_train_flags(c2d, t2d);

    // train-class ------------------------------------------------------------
    auto* ccl = app.add_subcommand("train-class", "class-conditional 2-D training");
    std::string scl_src = "vertical_gaussians", scl_tgt = "horizontal_gaussians";
    ArchFlags acl;
    acl.hidden = {64, 64, 64, 64, 64};
    TrainFlags tcl;
    ccl->add_option("--source", scl_src, "labeled dataset name or csv");
    ccl->add_option("--target", scl_tgt, "labeled dataset name or csv");
    add_arch_flags(ccl, acl);
    add_train_flags(ccl, tcl);

    // train-gaussian ---------------------------------------------------------
    auto* cga = app.add_subcommand("train-gaussian", "train on a random Gaussian pair");
    int dim = 2;
    std::uint64_t pair_seed = 0;
    bool pair_seed_given = false;
    ArchFlags aga;
    aga.quad_input = true;
    aga.beta = 3.0;
    TrainFlags tga;
    tga.lr = 1e-4;
    tga.n_mmd = 2000;
    tga.pool = 100000;
    cga->add_option("--dim", dim, "problem dimension")->required()->check(CLI::PositiveNumber);
    cga->add_option("--pair-seed", pair_seed, "covariance draw seed (defaults to --seed)")
        ->each([&](const std::string&) { pair_seed_given = true; });
    add_arch_flags(cga, aga);
    add_train_flags(cga, tga);

    // color-transfer ----------------------------------------------------------
    auto* cct = app.add_subcommand("color-transfer", "match the color palettes of two images");
    std::string ct_src, ct_tgt;
    ArchFlags act_flags;
    act_flags.hidden = {64, 64, 64, 64, 64};
    TrainFlags tct;
    tct.pool = 100000;
    cct->add_option("--source", ct_src, "source PPM (P6)")->required();
    cct->add_option("--target", ct_tgt, "target PPM (P6)")->required();
    add_arch_flags(cct, act_flags);
    add_train_flags(cct, tct);

    // eval-uvp ---------------------------------------------------------------
    auto* cuv = app.add_subcommand("eval-uvp", "deviation from the closed-form Gaussian map");
    std::string uv_ckpt, uv_pair, uv_out;
    std::size_t uv_n = 16384;
    std::uint64_t uv_seed = 0;
    cuv->add_option("--ckpt", uv_ckpt, "model checkpoint")->required();
    cuv->add_option("--pair", uv_pair, "gaussian pair sidecar (default: pair.csv next to ckpt)");
    cuv->add_option("--n", uv_n, "evaluation sample count");
    cuv->add_option("--seed", uv_seed, "evaluation seed");
    cuv->add_option("--out", uv_out, "output directory (default: ckpt directory)");

    // eval-roundtrip ------------------------------------------------------------
    auto* crt = app.add_subcommand("eval-roundtrip", "forward-then-backward displacement");
    std::string rt_ckpt, rt_pair, rt_dataset, rt_points, rt_out;
    std::size_t rt_n = 2000;
    std::uint64_t rt_seed = 0;
    crt->add_option("--ckpt", rt_ckpt, "model checkpoint")->required();
    crt->add_option("--pair", rt_pair, "gaussian pair sidecar");
    crt->add_option("--dataset", rt_dataset, "sample the points from a named dataset");
    crt->add_option("--points", rt_points, "points csv (raw coordinates)");
    crt->add_option("--n", rt_n, "sample count");
    crt->add_option("--seed", rt_seed, "sampling seed");
    crt->add_option("--out", rt_out, "output directory (default: ckpt directory)");

    // export-points ----------------------------------------------------------
    auto* cxp = app.add_subcommand("export-points", "write dataset samples to csv");
    std::string xp_dataset, xp_out;
    std::size_t xp_n = 1000;
    std::uint64_t xp_seed = 0;
    cxp->add_option("--dataset", xp_dataset, "dataset name")->required();
    cxp->add_option("--n", xp_n, "sample count");
    cxp->add_option("--seed", xp_seed, "sampling seed");
    cxp->add_option("--out", xp_out, "output csv path")->required();

    // ablate-lambda ----------------------------------------------------------
    auto* cab = app.add_subcommand("ablate-lambda", "sweep the residual weight 1/lambda");
    std::string ab_src = "checkerboard", ab_tgt = "eight_gaussians";
    std::vector<std::string> ab_lambdas = {"0.25", "1", "4", "inf"};
    ArchFlags aab;
    aab.hidden = {64, 64, 64, 64, 64};
    TrainFlags tab;
    cab->add_option("--source", ab_src, "dataset name or csv");
    cab->add_option("--target", ab_tgt, "dataset name or csv");
    cab->add_option("--lambdas", ab_lambdas, "lambda values ('inf' disables the residual terms)")
        ->delimiter(',');
    add_arch_flags(cab, aab);
    add_train_flags(cab, tab);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help to stdout or error to stderr
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(c2d)) return run_train_2d(s2d_src, s2d_tgt, a2d, t2d, cc2d, "train-2d");
        if (app.got_subcommand(ccl)) return run_train_2d(scl_src, scl_tgt, acl, tcl, true, "train-class");
        if (app.got_subcommand(cga)) {
            if (aga.hidden.empty())
                aga.hidden = {std::max(2 * dim, 64), std::max(2 * dim, 64), std::max(dim, 32)};
            return run_train_gaussian(dim, pair_seed_given ? pair_seed : tga.seed, aga, tga);
        }
        if (app.got_subcommand(cct)) return run_color_transfer(ct_src, ct_tgt, act_flags, tct);
        if (app.got_subcommand(cuv)) return run_eval_uvp(uv_ckpt, uv_pair, uv_n, uv_seed, uv_out);
        if (app.got_subcommand(crt))
            return run_eval_roundtrip(rt_ckpt, rt_pair, rt_dataset, rt_points, rt_n, rt_seed, rt_out);
        if (app.got_subcommand(cxp)) return run_export_points(xp_dataset, xp_n, xp_seed, xp_out);
        if (app.got_subcommand(cab)) return run_ablate_lambda(ab_src, ab_tgt, ab_lambdas, aab, tab);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
