// rblu: synthesise hyperspectral test cubes, unmix them, evaluate and export maps.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rblu/rblu.hpp"

namespace fs = std::filesystem;
using namespace rblu;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::uint64_t default_seed() {
    const char* env = std::getenv("RBLU_SEED");
    if (!env || !*env) return 1;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("RBLU_SEED is not an unsigned integer: '") + env + "'");
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os.flush()) throw DataError("write to '" + path.string() + "' failed");
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string preset = "desk-I2";
    std::optional<std::uint64_t> seed;
    fs::path out;
    std::optional<int> height, width, bands;
};

int cmd_synth(const SynthArgs& a) {
    Preset p = preset(a.preset);
    if (a.height) p.height = *a.height;
    if (a.width) p.width = *a.width;
    if (a.bands) p.bands = *a.bands;
    const std::uint64_t seed = a.seed ? *a.seed : default_seed();
    const SyntheticImage img = generate(p, seed);

    ensure_dir(a.out);
    io::write_cube(a.out / "cube.hsc", img.cube);
    io::write_sections(a.out / "truth.hsc", io::truth_sections(img.truth, p.height, p.width));

    io::KeyValueFile m;
    m.set("command", "synth");
    m.set("version", kVersion);
    m.set("preset", p.name);
    m.set("seed", seed);
    m.set("height", p.height);
    m.set("width", p.width);
    m.set("bands", p.bands);
    m.set("endmembers", p.r);
    m.set("noise_variance", img.truth.noise_var.mean());
    m.set("outlier_variance", p.s2);
    m.set("outliers", p.outliers ? 1 : 0);
    m.set("beta_N", p.beta.beta_N);
    m.set("beta_L", p.beta.beta_L);
    m.set("beta_0", p.beta.beta_0);
    m.set("bilinear", p.bilinear ? 1 : 0);
    if (p.bilinear) m.set("snr_db", p.snr_db);
    m.set("outlier_fraction", static_cast<double>(img.truth.labels.cast<std::int64_t>().sum()) /
                                  static_cast<double>(img.truth.labels.size()));
    m.write(a.out / "manifest.txt");
    std::cout << "wrote " << (a.out / "cube.hsc").string() << " (" << p.height << "x" << p.width << "x" << p.bands
              << ")\n";
    return 0;
}

// --- unmix -----------------------------------------------------------------

struct UnmixArgs {
    fs::path input;
    int r = 3;
    fs::path out;
    std::optional<std::uint64_t> seed;
    SamplerConfig cfg;
    bool literal_beta_step = false;
    bool no_abundance_axes = false;
};

int cmd_unmix(UnmixArgs a) {
    if (a.r < 2) throw std::invalid_argument("--R must be at least 2");
    a.cfg.seed = a.seed ? *a.seed : default_seed();
    a.cfg.per_site_beta_step = !a.literal_beta_step;
    a.cfg.abundance_eigen_moves = !a.no_abundance_axes;
    a.cfg.validate();
    const HsiCube cube = io::read_cube(a.input);
    const Chain chain = run_chain(cube, a.r, a.cfg);
    const PosteriorSummary post = summarize(chain);

    ensure_dir(a.out);
    io::write_sections(a.out / "summary.hsc", io::summary_sections(post, cube));
    io::write_endmember_csv(a.out / "endmembers.csv", post.endmembers);
    for (int k = 0; k < a.r; ++k)
        io::write_map_csv(a.out / ("abundance_" + std::to_string(k + 1) + ".csv"), post.abundances.row(k).transpose(),
                          cube.height(), cube.width());
    io::write_cube(a.out / "labels.hsc",
                   HsiCube(cube.height(), cube.width(), io::labels_to_matrix(post.labels.labels())));
    io::write_map_csv(a.out / "outlier_energy.csv", post.outlier_energy, cube.height(), cube.width());

    std::string sparse = "band,row,col,value\n";
    for (Eigen::Index n = 0; n < post.outliers.cols(); ++n)
        for (Eigen::Index l = 0; l < post.outliers.rows(); ++l)
            if (post.labels(static_cast<int>(l), static_cast<int>(n)))
                sparse += std::to_string(l) + "," + std::to_string(n / cube.width()) + "," +
                          std::to_string(n % cube.width()) + "," + fmt(post.outliers(l, n)) + "\n";
    write_text(a.out / "outliers.csv", sparse);

    std::string beta = "iteration,beta_N,beta_L,beta_0\n";
    for (std::size_t t = 0; t < chain.beta_trace.size(); ++t) {
        const auto& b = chain.beta_trace[t];
        beta += std::to_string(t + 1) + "," + fmt(b.beta_N) + "," + fmt(b.beta_L) + "," + fmt(b.beta_0) + "\n";
    }
    write_text(a.out / "beta_trace.csv", beta);

    std::string var = "iteration,s2";
    for (int l = 0; l < cube.bands(); ++l) var += ",sigma2_" + std::to_string(l + 1);
    var += "\n";
    for (std::size_t t = 0; t < chain.noise_trace.size(); ++t) {
        var += std::to_string(t + 1) + "," + fmt(chain.s2_trace[t]);
        for (int l = 0; l < cube.bands(); ++l) var += "," + fmt(chain.noise_trace[t](l));
        var += "\n";
    }
    write_text(a.out / "variance_trace.csv", var);

    const SamplerConfig& c = a.cfg;
    io::KeyValueFile m;
    m.set("command", "unmix");
    m.set("version", kVersion);
    m.set("input", fs::absolute(a.input).string());
    m.set("R", a.r);
    m.set("n_mc", c.n_mc);
    m.set("n_bi", c.n_bi);
    m.set("seed", c.seed);
    m.set("threads", c.threads);
    m.set("beta_bound", c.beta_bound);
    m.set("endmember_sweeps", c.endmember_sweeps);
    m.set("abundance_sweeps", c.abundance_sweeps);
    m.set("aux_sweeps", c.aux_sweeps);
    m.set("ridge_proposals", c.ridge_proposals);
    m.set("ridge_scale", c.ridge_scale);
    m.set("per_site_beta_step", c.per_site_beta_step ? 1 : 0);
    m.set("abundance_eigen_moves", c.abundance_eigen_moves ? 1 : 0);
    m.set("thinning", c.thinning);
    m.set("xi", c.hyper.xi);
    m.set("gamma", c.hyper.gamma);
    m.set("nu", c.hyper.nu);
    m.set("beta_init_N", c.beta_init.beta_N);
    m.set("beta_init_L", c.beta_init.beta_L);
    m.set("beta_init_0", c.beta_init.beta_0);
    m.set("s2_init", c.s2_init);
    m.set("retained", post.retained);
    m.set("beta_N", post.beta.beta_N);
    m.set("beta_L", post.beta.beta_L);
    m.set("beta_0", post.beta.beta_0);
    m.set("outlier_fraction",
          static_cast<double>(post.labels.count_ones()) / static_cast<double>(post.labels.sites()));
    m.write(a.out / "manifest.txt");
    std::cout << "wrote summary to " << a.out.string() << " (" << post.retained << " retained draws)\n";
    return 0;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
    fs::path summary;
    fs::path truth;
    fs::path report;
};

int cmd_evaluate(const EvaluateArgs& a) {
    if (!fs::exists(a.truth)) throw DataError("truth file '" + a.truth.string() + "' not found");
    const io::SectionFile sf = io::read_sections(a.summary);
    const io::SectionFile tf = io::read_sections(a.truth);
    if (sf.height != tf.height || sf.width != tf.width || sf.bands != tf.bands)
        throw DimensionError("summary and truth describe different cube geometries");
    const GroundTruth truth = io::truth_from_sections(tf);
    const Matrix& m_hat = sf.get("ENDM");
    const Matrix& a_hat = sf.get("ABND");
    const LabelMatrix z_hat = io::matrix_to_labels(sf.get("LABL"), "LABL");
    detail::require_dims(m_hat.rows() == truth.endmembers.rows() && m_hat.cols() == truth.endmembers.cols(),
                         "estimated endmembers", "expected " + detail::shape(truth.endmembers.rows(),
                                                                             truth.endmembers.cols()));

    const EndmemberMatch match = match_endmembers(m_hat, truth.endmembers);
    const double err = rnmse(align_abundances(a_hat, match), truth.abundances);
    const Confusion conf = detection_confusion(z_hat, truth.labels);
    const Matrix& rerr = sf.get("RERR");

    io::KeyValueFile kv;
    kv.set("rnmse", err);
    for (std::size_t k = 0; k < match.angles.size(); ++k) kv.set("sam_" + std::to_string(k + 1), match.angles[k]);
    kv.set("sam_mean", match.mean_angle());
    kv.set("tn", conf.tn());
    kv.set("fn", conf.fn());
    kv.set("fp", conf.fp());
    kv.set("tp", conf.tp());
    kv.set("total", conf.total());
    kv.set("tpr", conf.tpr());
    kv.set("fpr", conf.fpr());
    kv.set("recon_error_mean", rerr.mean());
    kv.set("recon_error_rms", std::sqrt(rerr.squaredNorm() / static_cast<double>(rerr.size())));
    kv.set("recon_error_max", rerr.maxCoeff());
    if (truth.nonlinear_mask) {
        const Vector energy = sf.get("ENRG").row(0).transpose();
        std::vector<bool> positive(static_cast<std::size_t>(energy.size()));
        double in = 0, out = 0;
        std::int64_t n_in = 0, n_out = 0;
        for (Eigen::Index n = 0; n < energy.size(); ++n) {
            positive[n] = (*truth.nonlinear_mask)(0, n) != 0;
            (positive[n] ? in : out) += energy(n);
            ++(positive[n] ? n_in : n_out);
        }
        const double mean_in = n_in ? in / double(n_in) : 0.0;
        const double mean_out = n_out ? out / double(n_out) : 0.0;
        kv.set("energy_mean_nonlinear", mean_in);
        kv.set("energy_mean_linear", mean_out);
        kv.set("energy_ratio", mean_out > 0 ? mean_in / mean_out : std::numeric_limits<double>::infinity());
        kv.set("auc", roc_auc(energy, positive));
    }

    std::ostringstream table;
    for (const auto& [k, v] : kv.entries()) table << k << '=' << v << '\n';
    char line[160];
    table << "\n";
    std::snprintf(line, sizeof line, "%-12s %14s %14s %14s\n", "", "z = 0", "z = 1", "total");
    table << line;
    std::snprintf(line, sizeof line, "%-12s %14lld %14lld %14lld\n", "z_hat = 0", (long long)conf.tn(),
                  (long long)conf.fn(), (long long)(conf.tn() + conf.fn()));
    table << line;
    std::snprintf(line, sizeof line, "%-12s %14lld %14lld %14lld\n", "z_hat = 1", (long long)conf.fp(),
                  (long long)conf.tp(), (long long)(conf.fp() + conf.tp()));
    table << line;
    std::snprintf(line, sizeof line, "%-12s %14lld %14lld %14lld\n", "total", (long long)(conf.tn() + conf.fp()),
                  (long long)(conf.fn() + conf.tp()), (long long)conf.total());
    table << line << "\n";
    std::snprintf(line, sizeof line, "abundance RNMSE %.4e   mean SAM %.4e rad   TPR %.4f   FPR %.6f\n", err,
                  match.mean_angle(), conf.tpr(), conf.fpr());
    table << line;

    std::cout << table.str();
    if (!a.report.empty()) write_text(a.report, table.str());
    return 0;
}

// --- export-maps -----------------------------------------------------------

struct ExportArgs {
    fs::path summary;
    fs::path out;
};

int cmd_export(const ExportArgs& a) {
    const io::SectionFile sf = io::read_sections(a.summary);
    const int h = static_cast<int>(sf.height);
    const int w = static_cast<int>(sf.width);
    ensure_dir(a.out);
    io::KeyValueFile scales;
    auto emit = [&](const std::string& name, const Vector& map) {
        const io::MapScale sc = io::write_pgm(a.out / (name + ".pgm"), map, h, w);
        scales.set(name + ".min", sc.min);
        scales.set(name + ".max", sc.max);
        scales.set(name + ".degenerate", sc.degenerate ? 1 : 0);
    };
    const Matrix& ab = sf.get("ABND");
    for (Eigen::Index k = 0; k < ab.rows(); ++k) emit("abundance_" + std::to_string(k + 1), ab.row(k).transpose());
    emit("outlier_energy", sf.get("ENRG").row(0).transpose());
    emit("reconstruction_error", sf.get("RERR").row(0).transpose());
    scales.write(a.out / "scales.txt");

    const Matrix& benr = sf.get("BENR");
    std::string csv;
    for (Eigen::Index l = 0; l < benr.rows(); ++l) csv += fmt(benr(l, 0)) + "\n";
    write_text(a.out / "band_energy.csv", csv);
    std::cout << "wrote " << ab.rows() + 2 << " maps to " << a.out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust Bayesian linear unmixing of hyperspectral cubes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic cube with ground truth");
    s->add_option("--preset", synth.preset, "One of paper-I1, paper-I2, paper-gbm, desk-I1, desk-I2, desk-gbm")
        ->capture_default_str();
    s->add_option("--seed", synth.seed, "Random seed (default: RBLU_SEED or 1)");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--height", synth.height)->check(CLI::PositiveNumber);
    s->add_option("--width", synth.width)->check(CLI::PositiveNumber);
    s->add_option("--bands", synth.bands)->check(CLI::PositiveNumber);

    UnmixArgs unmix;
    auto* u = app.add_subcommand("unmix", "Run the sampler and write the posterior summary");
    u->add_option("--input", unmix.input, "Cube file (HSC v1)")->required();
    u->add_option("--R", unmix.r, "Number of endmembers")->capture_default_str();
    u->add_option("--n-mc", unmix.cfg.n_mc, "Total iterations")->capture_default_str();
    u->add_option("--n-bi", unmix.cfg.n_bi, "Burn-in iterations")->capture_default_str();
    u->add_option("--seed", unmix.seed, "Random seed (default: RBLU_SEED or 1)");
    u->add_option("--out", unmix.out, "Output directory")->required();
    u->add_option("--threads", unmix.cfg.threads, "Worker threads; 1 is the reproducible schedule")
        ->capture_default_str();
    u->add_option("--beta-bound", unmix.cfg.beta_bound, "Upper bound on beta_N and beta_L")->capture_default_str();
    u->add_option("--endmember-sweeps", unmix.cfg.endmember_sweeps)->capture_default_str();
    u->add_option("--abundance-sweeps", unmix.cfg.abundance_sweeps)->capture_default_str();
    u->add_option("--aux-sweeps", unmix.cfg.aux_sweeps)->capture_default_str();
    u->add_option("--ridge-proposals", unmix.cfg.ridge_proposals, "Joint (M, A) moves per iteration")
        ->capture_default_str();
    u->add_option("--ridge-scale", unmix.cfg.ridge_scale)->capture_default_str();
    u->add_option("--thinning", unmix.cfg.thinning)->capture_default_str();
    u->add_flag("--literal-beta-step", unmix.literal_beta_step, "Do not divide the beta' step by the site count");
    u->add_flag("--no-abundance-axes", unmix.no_abundance_axes,
                "Coordinate-wise abundance updates only (skip the principal-axis pass)");

    EvaluateArgs eval;
    auto* e = app.add_subcommand("evaluate", "Compare a summary with ground truth");
    e->add_option("--summary", eval.summary, "summary.hsc from unmix")->required();
    e->add_option("--truth", eval.truth, "truth.hsc from synth")->required();
    e->add_option("--report", eval.report, "Also write the report to this file");

    ExportArgs exp;
    auto* x = app.add_subcommand("export-maps", "Write PGM maps and the band-energy CSV");
    x->add_option("--summary", exp.summary, "summary.hsc from unmix")->required();
    x->add_option("--out", exp.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*u) return cmd_unmix(unmix);
        if (*e) return cmd_evaluate(eval);
        if (*x) return cmd_export(exp);
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::out_of_range& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const DataError& err) {
        std::cerr << "data error: " << err.what() << "\n";
        return kExitData;
    } catch (const NumericalError& err) {
        std::cerr << "numerical failure: " << err.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& err) {
        std::cerr << "failure: " << err.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
