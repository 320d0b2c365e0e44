// acoustics: forward Helmholtz solves, admittance estimation, and room-shape
// optimization from plain-text config files. Exit codes: 0 success, 2 config
// or validation error, 3 solver failure, 4 verification failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "acoustics/atomic_write.hpp"
#include "acoustics/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace acoustics;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VerificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line-oriented `key = value` config with dotted keys and '#' comments.
class Config {
public:
    explicit Config(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            line = strip(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            if (key.empty() || !entries_.emplace(key, value).second)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": empty or duplicate key '" + key + "'");
        }
    }

    std::string get_string(const std::string& key, std::optional<std::string> fallback = {}) {
        used_.insert(key);
        const auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
        if (fallback) return *fallback;
        throw ConfigError("missing required config key '" + key + "'");
    }

    double get_double(const std::string& key, std::optional<double> fallback = {}) {
        used_.insert(key);
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (fallback) return *fallback;
            throw ConfigError("missing required config key '" + key + "'");
        }
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
        }
    }

    long get_int(const std::string& key, std::optional<long> fallback = {}) {
        used_.insert(key);
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (fallback) return *fallback;
            throw ConfigError("missing required config key '" + key + "'");
        }
        try {
            std::size_t pos = 0;
            const long v = std::stol(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not an integer: '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) {
        const std::string v = get_string(key, fallback ? "true" : "false");
        if (v == "true") return true;
        if (v == "false") return false;
        throw ConfigError("config key '" + key + "': expected true or false");
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    /// Call after every key a command understands was read.
    void reject_unknown() const {
        for (const auto& [key, value] : entries_)
            if (!used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

private:
    std::map<std::string, std::string> entries_;
    std::set<std::string> used_;
};

struct CommonArgs {
    fs::path config_path;
    fs::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

Mesh load_or_generate_mesh(Config& cfg) {
    if (cfg.has("mesh.path")) return read_mesh(cfg.get_string("mesh.path"));
    const double width = cfg.get_double("domain.width");
    const double height = cfg.get_double("domain.height");
    const int nx = static_cast<int>(cfg.get_int("mesh.nx"));
    const int ny = static_cast<int>(cfg.get_int("mesh.ny"));
    try {
        return generate_rect_mesh(width, height, nx, ny);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

HelmholtzProblem read_problem(Config& cfg) {
    HelmholtzProblem p;
    p.frequency = cfg.get_double("physics.frequency");
    p.sound_speed = cfg.get_double("physics.sound_speed", 343.0);
    p.source.center = {cfg.get_double("source.x"), cfg.get_double("source.y")};
    p.source.sigma = cfg.get_double("source.sigma");
    p.source.amplitude = cfg.get_double("source.amplitude");
    p.admittance = {cfg.get_double("admittance.beta_r", 0.0),
                    cfg.get_double("admittance.beta_i", 0.0)};
    if (!(p.frequency > 0.0) || !(p.sound_speed > 0.0) || !(p.source.sigma > 0.0))
        throw ConfigError("physics: frequency, sound_speed, and source.sigma must be positive");
    return p;
}

std::vector<Point2> read_clusters(Config& cfg) {
    // "x,y x,y x,y"
    std::istringstream ss(cfg.get_string("measurements.clusters"));
    std::vector<Point2> centers;
    std::string tok;
    while (ss >> tok) {
        const auto comma = tok.find(',');
        if (comma == std::string::npos)
            throw ConfigError("measurements.clusters: expected 'x,y' pairs");
        try {
            centers.push_back({std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1))});
        } catch (const std::exception&) {
            throw ConfigError("measurements.clusters: malformed pair '" + tok + "'");
        }
    }
    if (centers.empty()) throw ConfigError("measurements.clusters: no cluster centers");
    return centers;
}

FirstOrderMethod read_optimizer(Config& cfg, const std::string& key,
                                const std::string& fallback) {
    const std::string v = cfg.get_string(key, fallback);
    if (v == "sgd" || v == "gradient-descent") return FirstOrderMethod::Sgd;
    if (v == "adam") return FirstOrderMethod::Adam;
    throw ConfigError("config key '" + key + "': expected sgd or adam");
}

void write_json(const fs::path& path, const json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

int cmd_meshgen(Config& cfg, const CommonArgs& args) {
    const Mesh mesh = load_or_generate_mesh(cfg);
    const std::string name = cfg.get_string("output", "mesh.txt");
    cfg.reject_unknown();
    write_mesh(mesh, args.out_dir / name);
    write_obj(mesh, args.out_dir / (name + ".obj"));
    const auto c = mesh.counts();
    std::cout << "mesh: " << c.n_vertices << " vertices (" << c.n_boundary << " boundary, "
              << c.n_interior << " interior), " << c.n_triangles << " triangles\n";
    return 0;
}

int cmd_forward(Config& cfg, const CommonArgs& args) {
    const Mesh mesh = load_or_generate_mesh(cfg);
    const HelmholtzProblem problem = read_problem(cfg);
    cfg.reject_unknown();

    const auto sys = assemble(mesh, problem);
    const auto field = solve(sys, mesh);
    const double energy = acoustic_energy(field, mesh);
    const double residual = sys.rhs.norm() > 0.0
                                ? (sys.matrix * field.nodal - sys.rhs).norm() / sys.rhs.norm()
                                : 0.0;

    write_field_csv(field, mesh, args.out_dir / "field.csv");
    write_json(args.out_dir / "forward.json",
               {{"k", problem.wavenumber()}, {"energy", energy}, {"residual", residual}});
    std::cout << "k = " << problem.wavenumber() << ", energy = " << energy
              << ", residual = " << residual << "\n";
    return 0;
}

int cmd_estimate(Config& cfg, const CommonArgs& args) {
    const Mesh mesh = load_or_generate_mesh(cfg);
    HelmholtzProblem problem = read_problem(cfg);

    EstimationConfig est;
    est.problem = problem;
    est.initial_admittance = {cfg.get_double("init.beta_r"), cfg.get_double("init.beta_i")};
    est.weights = {cfg.get_double("weights.w_mag"), cfg.get_double("weights.w_phase"),
                   cfg.get_double("weights.w_rel")};
    est.optimizer = read_optimizer(cfg, "optimizer", "sgd");
    est.step_size = cfg.get_double("step_size", 0.1);
    est.iterations = static_cast<int>(cfg.get_int("iterations", 300));
    if (est.iterations < 1) throw ConfigError("iterations must be >= 1");

    std::optional<Admittance> beta_true;
    MeasurementSet meas;
    if (cfg.has("measurements.path")) {
        const std::string path = cfg.get_string("measurements.path");
        cfg.reject_unknown();
        try {
            meas = read_measurements_csv(path);
            // Points must be interpolatable on this mesh.
            PressureField probe{ComplexVector::Zero(mesh.vertices.size()), &mesh};
            for (const auto& p : meas.points) eval_field(probe, p);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    } else {
        beta_true = Admittance{cfg.get_double("truth.beta_r"), cfg.get_double("truth.beta_i")};
        const auto centers = read_clusters(cfg);
        const double radius = cfg.get_double("measurements.radius");
        const double noise_level = cfg.get_double("noise.level", 0.0);
        const std::uint64_t noise_seed =
            args.seed ? *args.seed
                      : static_cast<std::uint64_t>(cfg.get_int("noise.seed", 0));
        cfg.reject_unknown();

        HelmholtzProblem truth_problem = problem;
        truth_problem.admittance = *beta_true;
        const auto field = solve(assemble(mesh, truth_problem), mesh);
        meas = sample_measurements(field, centers, radius);
        meas = add_noise(meas, noise_level, noise_seed);
        write_measurements_csv(meas, args.out_dir / "measurements.csv");
    }

    const auto trace = estimate_admittance(mesh, est, meas);
    write_estimation_trace_csv(trace, args.out_dir / "estimate_trace.csv");

    json report = {{"beta_est",
                    {{"re", trace.final_admittance.beta_r}, {"im", trace.final_admittance.beta_i}}},
                   {"iterations", trace.iterations.size()},
                   {"failed", trace.failed}};
    if (beta_true) {
        const double err = std::hypot(trace.final_admittance.beta_r - beta_true->beta_r,
                                      trace.final_admittance.beta_i - beta_true->beta_i);
        report["beta_true"] = {{"re", beta_true->beta_r}, {"im", beta_true->beta_i}};
        report["abs_error"] = err;
    }
    write_json(args.out_dir / "estimate.json", report);
    if (trace.failed) throw std::runtime_error("estimation aborted on a solver failure");
    std::cout << "beta_est = " << trace.final_admittance.beta_r << " + "
              << trace.final_admittance.beta_i << "i\n";
    return 0;
}

int cmd_shapeopt(Config& cfg, const CommonArgs& args) {
    const Mesh mesh = load_or_generate_mesh(cfg);

    ShapeOptConfig so;
    so.problem = read_problem(cfg);
    so.boundary_step = cfg.get_double("shape.boundary_step", 0.1);
    so.interior_step = cfg.get_double("shape.interior_step", 0.1);
    so.m_inner = static_cast<int>(cfg.get_int("shape.m_inner", 20));
    so.max_outer = static_cast<int>(cfg.get_int("shape.max_outer", 100));
    so.tolerance = cfg.get_double("shape.tolerance", 0.0);
    so.rand_grad.samples = static_cast<int>(cfg.get_int("shape.samples", 30));
    so.rand_grad.epsilon = cfg.get_double("shape.epsilon", 1e-3);
    so.rand_grad.seed = args.seed ? *args.seed
                                  : static_cast<std::uint64_t>(cfg.get_int("shape.seed", 0));
    so.rand_grad.threads = args.threads ? *args.threads
                                        : static_cast<int>(cfg.get_int("shape.threads", 1));
    so.mesh_weights = {cfg.get_double("mesh_loss.w_e", 1.0), cfg.get_double("mesh_loss.w_l", 1.0),
                       cfg.get_double("mesh_loss.w_n", 1.0),
                       cfg.get_double("mesh_loss.w_A", 100.0)};
    const std::string norm = cfg.get_string("shape.normalization", "initial-energy");
    if (norm != "initial-energy" && norm != "none")
        throw ConfigError("shape.normalization: expected initial-energy or none");
    so.normalize_by_initial_energy = norm == "initial-energy";
    so.optimizer = read_optimizer(cfg, "optimizer", "adam");
    so.snapshot_every = static_cast<int>(cfg.get_int("shape.snapshot_every", 0));
    const bool measure_baseline = cfg.get_bool("shape.measure_fd_baseline", true);
    const double fd_step = cfg.get_double("shape.fd_baseline_step", 1e-6);
    cfg.reject_unknown();
    if (so.m_inner < 1 || so.max_outer < 1 || so.rand_grad.samples < 1)
        throw ConfigError("shape: m_inner, max_outer, and samples must be >= 1");

    const auto trace = optimize_shape(mesh, so);
    write_shapeopt_trace_csv(trace, args.out_dir / "shapeopt_trace.csv");
    for (const auto& [iter, snap] : trace.snapshots) {
        const std::string stem = "mesh_" + std::to_string(iter);
        write_mesh(snap, args.out_dir / (stem + ".txt"));
        write_obj(snap, args.out_dir / (stem + ".obj"));
    }
    write_mesh(trace.final_mesh, args.out_dir / "mesh_final.txt");
    write_obj(trace.final_mesh, args.out_dir / "mesh_final.obj");

    long baseline = 0;
    if (measure_baseline && trace.stop_reason != StopReason::Error) {
        const double reference_area = signed_area(mesh);
        auto objective = [&](const Mesh& m) {
            return boundary_objective(m, so.problem, reference_area, so.mesh_weights.w_A,
                                      so.normalize_by_initial_energy ? trace.initial_energy : 1.0)
                .objective;
        };
        baseline = fd_full_mesh_gradient(mesh, objective, fd_step).evaluations;
    }

    const double reduction =
        trace.initial_energy > 0.0 ? 1.0 - trace.final_energy / trace.initial_energy : 0.0;
    const long per_iter = so.rand_grad.samples + 1;
    json report = {
        {"initial_energy", trace.initial_energy},
        {"final_energy", trace.final_energy},
        {"reduction", reduction},
        {"outer_iterations", trace.iterations.size()},
        {"total_pde_solves", trace.total_pde_solves},
        {"redraw_solves", trace.redraw_solves},
        {"solves_per_iteration", per_iter},
        {"stop_reason", trace.stop_reason == StopReason::MaxIterations ? "max-iters"
                        : trace.stop_reason == StopReason::Tolerance   ? "tolerance"
                                                                       : "error"},
    };
    if (baseline > 0) {
        report["fd_baseline_solves"] = baseline;
        report["speedup"] = static_cast<double>(baseline) / static_cast<double>(per_iter);
    }
    if (trace.stop_reason == StopReason::Error) report["error"] = trace.error_message;
    write_json(args.out_dir / "shapeopt.json", report);

    if (trace.stop_reason == StopReason::Error)
        throw std::runtime_error("shape optimization aborted: " + trace.error_message);
    std::cout << "energy " << trace.initial_energy << " -> " << trace.final_energy << " ("
              << reduction * 100.0 << "% reduction), " << trace.total_pde_solves
              << " PDE solves\n";
    return 0;
}

int cmd_gradcheck(Config& cfg, const CommonArgs& args) {
    const double width = cfg.get_double("domain.width", 2.0);
    const double height = cfg.get_double("domain.height", 2.0);
    const int nx = static_cast<int>(cfg.get_int("mesh.nx", 8));
    const int ny = static_cast<int>(cfg.get_int("mesh.ny", 8));
    const int samples = static_cast<int>(cfg.get_int("samples", 200));
    const std::uint64_t seed =
        args.seed ? *args.seed : static_cast<std::uint64_t>(cfg.get_int("seed", 7));
    const bool corrupt = cfg.get_bool("corrupt", false);  // negative-control hook
    cfg.reject_unknown();

    const Mesh mesh = generate_rect_mesh(width, height, nx, ny);

    HelmholtzProblem problem;
    problem.frequency = 400.0;
    problem.source = {{width / 2.0, height / 2.0}, 0.15, 100.0};
    problem.admittance = {1.2, 0.2};

    // (a) adjoint beta-gradient vs central FD.
    const auto truth = solve(assemble(mesh, problem), mesh);
    auto meas = sample_measurements(truth, {{width / 2.0, height * 0.8}}, 0.4);
    HelmholtzProblem probe = problem;
    probe.admittance = {2.0, -0.1};
    const LossWeights weights{0.5, 0.1, 5.0};
    auto g = loss_gradient_beta(mesh, probe, meas, weights);
    if (corrupt) g.d_beta_r += 1.0;

    const double h = 1e-6;
    auto loss_at = [&](double br, double bi) {
        HelmholtzProblem p = probe;
        p.admittance = {br, bi};
        const auto field = solve(assemble(mesh, p), mesh);
        MeasurementSet pred = meas;
        for (std::size_t i = 0; i < meas.points.size(); ++i)
            pred.values[i] = eval_field(field, meas.points[i]);
        return admittance_loss(pred, meas, weights);
    };
    const double fd_r = (loss_at(probe.admittance.beta_r + h, probe.admittance.beta_i) -
                         loss_at(probe.admittance.beta_r - h, probe.admittance.beta_i)) /
                        (2.0 * h);
    const double fd_i = (loss_at(probe.admittance.beta_r, probe.admittance.beta_i + h) -
                         loss_at(probe.admittance.beta_r, probe.admittance.beta_i - h)) /
                        (2.0 * h);
    const double adjoint_err =
        std::hypot(g.d_beta_r - fd_r, g.d_beta_i - fd_i) / std::hypot(fd_r, fd_i);

    // (b) analytic mesh-loss interior gradient vs central FD.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    auto verts = mesh.vertices;
    const double hmesh = std::min(width / nx, height / ny);
    for (int id : mesh.interior_vertex_ids) {
        verts[id].x += jitter(rng) * hmesh;
        verts[id].y += jitter(rng) * hmesh;
    }
    const Mesh perturbed = mesh.with_vertices(verts);
    const MeshLossWeights mw{1.0, 1.0, 1.0, 100.0};
    const double ref_area = width * height;
    const Eigen::MatrixX2d analytic = mesh_loss_gradient_interior(perturbed, mw, ref_area);
    double mesh_grad_err = 0.0;
    for (std::size_t r = 0; r < perturbed.interior_vertex_ids.size(); ++r) {
        const int id = perturbed.interior_vertex_ids[r];
        for (int c = 0; c < 2; ++c) {
            auto shifted = [&](double delta) {
                auto vs = perturbed.vertices;
                (c == 0 ? vs[id].x : vs[id].y) += delta;
                return mesh_loss(perturbed.with_vertices(vs), mw, ref_area).total;
            };
            const double fd = (shifted(1e-6) - shifted(-1e-6)) / 2e-6;
            const double denom = std::max(std::abs(fd), 1.0);
            mesh_grad_err = std::max(mesh_grad_err, std::abs(analytic(r, c) - fd) / denom);
        }
    }

    // (c) randomized boundary estimate vs the full-FD oracle.
    const double reference_area = signed_area(mesh);
    const double norm_energy = acoustic_energy(truth, mesh);
    auto objective = [&](const Mesh& m) {
        return boundary_objective(m, problem, reference_area, 100.0, norm_energy).objective;
    };
    RandGradConfig rc{samples, 1e-3, seed, args.threads.value_or(1)};
    const auto est = randomized_boundary_gradient(mesh, objective, rc);
    const auto oracle = fd_full_mesh_gradient(mesh, objective, 1e-5);
    Eigen::VectorXd a(2 * mesh.boundary_vertex_ids.size()), b(a.size());
    for (std::size_t r = 0; r < mesh.boundary_vertex_ids.size(); ++r) {
        a[2 * r] = est.gradient(r, 0);
        a[2 * r + 1] = est.gradient(r, 1);
        b[2 * r] = oracle.gradient(mesh.boundary_vertex_ids[r], 0);
        b[2 * r + 1] = oracle.gradient(mesh.boundary_vertex_ids[r], 1);
    }
    const double cosine = a.dot(b) / (a.norm() * b.norm());

    const bool adjoint_ok = adjoint_err <= 1e-4;
    const bool mesh_ok = mesh_grad_err <= 1e-6;
    const bool cosine_ok = cosine >= 0.3;
    write_json(args.out_dir / "gradcheck.json",
               {{"adjoint_vs_fd_rel_error", adjoint_err},
                {"mesh_loss_grad_vs_fd_rel_error", mesh_grad_err},
                {"randomized_vs_fd_cosine", cosine},
                {"randomized_samples", samples},
                {"pass", adjoint_ok && mesh_ok && cosine_ok}});
    std::cout << "adjoint vs FD: " << adjoint_err << (adjoint_ok ? " (ok)" : " (FAIL)") << "\n"
              << "mesh-loss grad vs FD: " << mesh_grad_err << (mesh_ok ? " (ok)" : " (FAIL)")
              << "\n"
              << "randomized vs FD cosine: " << cosine << (cosine_ok ? " (ok)" : " (FAIL)")
              << "\n";
    if (!adjoint_ok) throw VerificationError("adjoint gradient check failed");
    if (!mesh_ok) throw VerificationError("mesh-loss gradient check failed");
    if (!cosine_ok) throw VerificationError("randomized estimator check failed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D Helmholtz acoustics: forward solves, admittance estimation, "
                 "and room-shape optimization"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string seed_str, threads_str;
    for (const char* name : {"meshgen", "forward", "estimate", "shapeopt", "gradcheck"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "config file")->required();
        sub->add_option("--out-dir", args.out_dir, "output directory");
        sub->add_option("--seed", seed_str, "override config seeds");
        sub->add_option("--threads", threads_str, "sampling threads");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!seed_str.empty()) args.seed = std::stoull(seed_str);
        if (!threads_str.empty()) {
            args.threads = std::stoi(threads_str);
        } else if (const char* env = std::getenv("ACOUSTICS_THREADS")) {
            args.threads = std::stoi(env);
        }
    } catch (const std::exception&) {
        std::cerr << "error: --seed/--threads must be integers\n";
        return 2;
    }

    try {
        std::filesystem::create_directories(args.out_dir);
        Config cfg(args.config_path);
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "meshgen") return cmd_meshgen(cfg, args);
        if (sub == "forward") return cmd_forward(cfg, args);
        if (sub == "estimate") return cmd_estimate(cfg, args);
        if (sub == "shapeopt") return cmd_shapeopt(cfg, args);
        if (sub == "gradcheck") return cmd_gradcheck(cfg, args);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const VerificationError& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    }
}
