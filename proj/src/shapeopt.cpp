#include "acoustics/shapeopt.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace acoustics {

namespace {

Eigen::MatrixX2d draw_direction(std::uint64_t seed, int sample, int attempt, Eigen::Index n_b) {
    // Counter-based seeding: every (sample, attempt) pair has its own stream,
    // so the estimate does not depend on evaluation order.
    std::seed_seq seq{static_cast<unsigned>(seed & 0xffffffffu),
                      static_cast<unsigned>(seed >> 32),
                      static_cast<unsigned>(sample),
                      static_cast<unsigned>(attempt)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixX2d d(n_b, 2);
    for (Eigen::Index r = 0; r < n_b; ++r) {
        d(r, 0) = dist(rng);
        d(r, 1) = dist(rng);
    }
    return d;
}

Mesh perturb_boundary(const Mesh& mesh, const Eigen::MatrixX2d& displacement) {
    auto verts = mesh.vertices;
    for (std::size_t r = 0; r < mesh.boundary_vertex_ids.size(); ++r) {
        const int id = mesh.boundary_vertex_ids[r];
        verts[id].x += displacement(r, 0);
        verts[id].y += displacement(r, 1);
    }
    return mesh.with_vertices(std::move(verts));
}

RandGradResult rand_grad_impl(const Mesh& mesh,
                              const std::function<double(const Mesh&)>& objective,
                              const RandGradConfig& config, const double* precomputed_base) {
    if (config.samples < 1)
        throw std::invalid_argument("randomized_boundary_gradient: samples must be >= 1");
    if (!(config.epsilon > 0.0))
        throw std::invalid_argument("randomized_boundary_gradient: epsilon must be positive");

    const Eigen::Index n_b = static_cast<Eigen::Index>(mesh.boundary_vertex_ids.size());
    RandGradResult result;
    result.evaluations = 0;
    result.redraws = 0;

    if (precomputed_base) {
        result.base_objective = *precomputed_base;
    } else {
        result.base_objective = objective(mesh);
        result.evaluations += 1;
    }
    const double j0 = result.base_objective;

    std::vector<Eigen::MatrixX2d> contributions(config.samples);
    std::atomic<long> redraws{0};
    std::atomic<long> extra_evals{0};

    auto run_sample = [&](int s) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 3)
                throw std::runtime_error(
                    "randomized_boundary_gradient: sample " + std::to_string(s) +
                    " failed after 3 redraws");
            const Eigen::MatrixX2d d = draw_direction(config.seed, s, attempt, n_b);
            try {
                const double j = objective(perturb_boundary(mesh, config.epsilon * d));
                extra_evals += 1;
                const double g = (j - j0) / config.epsilon;
                contributions[s] = g * d;
                return;
            } catch (const std::exception&) {
                extra_evals += 1;
                redraws += 1;
            }
        }
    };

    const int threads = std::max(1, config.threads);
    if (threads == 1) {
        for (int s = 0; s < config.samples; ++s) run_sample(s);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int s = next++; s < config.samples; s = next++) {
                    try {
                        run_sample(s);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    Eigen::MatrixX2d grad = Eigen::MatrixX2d::Zero(n_b, 2);
    for (const auto& c : contributions) grad += c;  // fixed order: deterministic
    grad /= static_cast<double>(config.samples);

    result.gradient = std::move(grad);
    result.evaluations += extra_evals.load();
    result.redraws = redraws.load();
    return result;
}

struct EnergyArea {
    double energy;
    double area;
};

EnergyArea evaluate_energy_area(const Mesh& mesh, const HelmholtzProblem& problem) {
    const auto sys = assemble(mesh, problem);
    const auto field = solve(sys, mesh);
    return {acoustic_energy(field, mesh), signed_area(mesh)};
}

} // namespace

ObjectiveBreakdown boundary_objective(const Mesh& mesh, const HelmholtzProblem& problem,
                                      double reference_area, double w_A, double normalization) {
    if (!(normalization > 0.0))
        throw std::invalid_argument("boundary_objective: normalization must be positive");
    const auto ea = evaluate_energy_area(mesh, problem);
    const double darea = ea.area - reference_area;
    return {ea.energy / normalization + w_A * darea * darea, ea.energy, ea.area};
}

RandGradResult randomized_boundary_gradient(const Mesh& mesh,
                                            const std::function<double(const Mesh&)>& objective,
                                            const RandGradConfig& config) {
    return rand_grad_impl(mesh, objective, config, nullptr);
}

BoundaryOptimizer::BoundaryOptimizer(FirstOrderMethod method, double step_size,
                                     Eigen::Index n_coords)
    : method_(method), step_size_(step_size), adam_(AdamState::zeros(n_coords)) {}

Eigen::VectorXd BoundaryOptimizer::propose(const Eigen::VectorXd& grad) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(grad.size());
    if (method_ == FirstOrderMethod::Adam)
        return adam_step(zero, grad, adam_, step_size_);
    return descent_step(zero, grad, DescentState{step_size_});
}

void BoundaryOptimizer::reset() { adam_ = AdamState::zeros(adam_.first_moment.size()); }

Mesh apply_boundary_update(const Mesh& mesh, const Eigen::VectorXd& delta,
                           double min_area_margin) {
    const Eigen::Index n_b = static_cast<Eigen::Index>(mesh.boundary_vertex_ids.size());
    if (delta.size() != 2 * n_b)
        throw std::invalid_argument("apply_boundary_update: displacement shape mismatch");

    auto min_area = [](const Mesh& m) {
        double a = std::numeric_limits<double>::infinity();
        for (const auto& t : m.triangles)
            a = std::min(a, triangle_signed_area(m.vertices[t.a], m.vertices[t.b],
                                                 m.vertices[t.c]));
        return a;
    };
    // Accepted iterates must stay FEM-usable (simple boundary loop, no
    // collapsed or inverted triangle) and keep enough triangle-area margin
    // that later finite-difference boundary perturbations stay solvable.
    // Hysteresis: a mesh already at the margin may keep triangles at their
    // current worst rather than being frozen outright.
    const double guard = std::max(
        kMinTriangleArea, std::min(min_area_margin, min_area(mesh)));

    std::vector<int> boundary_row(mesh.vertices.size(), -1);
    for (Eigen::Index r = 0; r < n_b; ++r) boundary_row[mesh.boundary_vertex_ids[r]] = static_cast<int>(r);

    double scale = 1.0;
    for (int halving = 0; halving <= 5; ++halving, scale *= 0.5) {
        // The guards are enforced per vertex: only vertices of triangles that
        // would fall below the area guard, or of boundary edges that would
        // cross, have their displacement scaled back, so one pinching spot
        // cannot veto the whole update. Backed-off vertices converge to their
        // pre-step positions, which satisfy both guards by induction, so the
        // loop terminates.
        Eigen::VectorXd vscale = Eigen::VectorXd::Constant(n_b, scale);
        Mesh candidate = mesh;
        auto back_off = [&](Eigen::Index row) {
            double& s = vscale[row];
            s = (s < scale * 0x1p-20) ? 0.0 : 0.5 * s;
        };
        for (int pass = 0; pass < 200; ++pass) {
            Eigen::MatrixX2d d(n_b, 2);
            for (Eigen::Index r = 0; r < n_b; ++r) {
                d(r, 0) = vscale[r] * delta[2 * r];
                d(r, 1) = vscale[r] * delta[2 * r + 1];
            }
            candidate = perturb_boundary(mesh, d);
            bool violating = false;
            for (const auto& t : candidate.triangles) {
                const double a = triangle_signed_area(candidate.vertices[t.a],
                                                      candidate.vertices[t.b],
                                                      candidate.vertices[t.c]);
                if (a >= guard) continue;
                violating = true;
                for (int v : {t.a, t.b, t.c})
                    if (boundary_row[v] >= 0) back_off(boundary_row[v]);
            }
            const auto& loop = candidate.boundary_vertex_ids;
            const std::size_t n = loop.size();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 2; j < n; ++j) {
                    if (i == 0 && j == n - 1) continue;  // adjacent around the loop
                    if (!segments_cross(candidate.vertices[loop[i]],
                                        candidate.vertices[loop[(i + 1) % n]],
                                        candidate.vertices[loop[j]],
                                        candidate.vertices[loop[(j + 1) % n]]))
                        continue;
                    violating = true;
                    back_off(static_cast<Eigen::Index>(i));
                    back_off(static_cast<Eigen::Index>((i + 1) % n));
                    back_off(static_cast<Eigen::Index>(j));
                    back_off(static_cast<Eigen::Index>((j + 1) % n));
                }
            }
            if (!violating) break;
        }
        if (min_area(candidate) >= guard && boundary_is_simple(candidate)) return candidate;
    }
    throw std::runtime_error(
        "apply_boundary_update: boundary self-intersects even after 5 step halvings");
}

ShapeOptTrace optimize_shape(const Mesh& mesh, const ShapeOptConfig& config) {
    if (config.max_outer < 1)
        throw std::invalid_argument("optimize_shape: max_outer must be >= 1");

    ShapeOptTrace trace;
    trace.final_mesh = mesh;
    const double reference_area = signed_area(mesh);
    const double w_A = config.mesh_weights.w_A;

    long solves = 0;
    Mesh current = mesh;

    double normalization = 1.0;
    EnergyArea breakdown;
    try {
        breakdown = evaluate_energy_area(current, config.problem);
        solves += 1;
        trace.initial_energy = breakdown.energy;
        trace.final_energy = breakdown.energy;
        if (config.normalize_by_initial_energy) normalization = breakdown.energy;
    } catch (const std::exception& e) {
        trace.stop_reason = StopReason::Error;
        trace.error_message = e.what();
        return trace;
    }

    auto objective = [&](const Mesh& m) {
        const auto ea = evaluate_energy_area(m, config.problem);
        const double darea = ea.area - reference_area;
        return ea.energy / normalization + w_A * darea * darea;
    };
    auto objective_of = [&](const EnergyArea& ea) {
        const double darea = ea.area - reference_area;
        return ea.energy / normalization + w_A * darea * darea;
    };

    if (config.snapshot_every > 0) trace.snapshots.emplace_back(0, current);

    BoundaryOptimizer boundary_opt(config.optimizer, config.boundary_step,
                                   2 * static_cast<Eigen::Index>(current.boundary_vertex_ids.size()));

    double initial_min_area = std::numeric_limits<double>::infinity();
    for (const auto& t : current.triangles)
        initial_min_area = std::min(
            initial_min_area, triangle_signed_area(current.vertices[t.a], current.vertices[t.b],
                                                   current.vertices[t.c]));

    double j_prev = std::numeric_limits<double>::infinity();
    Mesh last_evaluated = current;
    bool last_skipped = false;
    trace.stop_reason = StopReason::MaxIterations;

    // The base evaluation of each iteration is the previous iteration's
    // end-of-iteration solve, so each outer step costs exactly S + 1 solves.
    for (int k = 0; k < config.max_outer; ++k) {
        try {
            const double j0 = objective_of(breakdown);
            // A skipped boundary update leaves the objective (nearly)
            // unchanged without representing convergence, so the tolerance
            // test only applies after a completed step.
            if (!last_skipped && std::abs(j0 - j_prev) <= config.tolerance) {
                trace.stop_reason = StopReason::Tolerance;
                break;
            }
            j_prev = j0;

            // Each outer iteration gets its own direction stream (still fully
            // determined by the configured seed); reusing one stream would
            // confine the whole run to the same 30 sampled directions.
            RandGradConfig iter_rand = config.rand_grad;
            iter_rand.seed += 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(k + 1);
            auto rg = rand_grad_impl(current, objective, iter_rand, &j0);
            solves += rg.evaluations;
            trace.redraw_solves += rg.redraws;

            const Eigen::Index n_b =
                static_cast<Eigen::Index>(current.boundary_vertex_ids.size());
            Eigen::VectorXd grad(2 * n_b);
            for (Eigen::Index r = 0; r < n_b; ++r) {
                grad[2 * r] = rg.gradient(r, 0);
                grad[2 * r + 1] = rg.gradient(r, 1);
            }
            const double start_energy = breakdown.energy;
            const double start_area = breakdown.area;

            // An update that stays invalid after all halvings is skipped rather
            // than aborting the run: the iterate is kept, the optimizer moments
            // are reset so the rejected direction is not replayed, and the next
            // iteration draws fresh perturbation directions.
            double mean_edge = 0.0;
            const auto& loop = current.boundary_vertex_ids;
            for (std::size_t i = 0; i < loop.size(); ++i) {
                const Point2& a = current.vertices[loop[i]];
                const Point2& b = current.vertices[loop[(i + 1) % loop.size()]];
                mean_edge += std::hypot(b.x - a.x, b.y - a.y);
            }
            mean_edge /= static_cast<double>(loop.size());
            // Keep accepted iterates comfortably above degeneracy: triangles
            // are held at a tenth of the initial worst-case quality, and never
            // below the scale the finite-difference sampling perturbs at.
            const double margin =
                std::max(0.1 * initial_min_area, 10.0 * config.rand_grad.epsilon * mean_edge);

            // Floor-area preservation. The objective's quadratic penalty alone
            // cannot hold the area under Adam: sign-like per-coordinate steps
            // inject O(step²) area error each iteration, and once the penalty
            // gradient dominates it drowns the energy signal and the descent
            // stalls. Instead the proposed update is projected along dA/dV —
            // iterated to solve the (quadratic) area constraint, not just its
            // linearization — so each accepted iterate restores the reference
            // area; the penalty handles what guard rescaling then misses.
            auto project_area = [&](Eigen::VectorXd s) {
                for (int newton = 0; newton < 8; ++newton) {
                    auto verts = current.vertices;
                    for (Eigen::Index i = 0; i < n_b; ++i) {
                        verts[loop[i]].x += s[2 * i];
                        verts[loop[i]].y += s[2 * i + 1];
                    }
                    double area = 0.0;
                    Eigen::VectorXd darea(2 * n_b);
                    for (Eigen::Index i = 0; i < n_b; ++i) {
                        const Point2& pm = verts[loop[(i + n_b - 1) % n_b]];
                        const Point2& pc = verts[loop[i]];
                        const Point2& pp = verts[loop[(i + 1) % n_b]];
                        area += 0.5 * (pc.x * pp.y - pp.x * pc.y);
                        darea[2 * i] = 0.5 * (pp.y - pm.y);
                        darea[2 * i + 1] = 0.5 * (pm.x - pp.x);
                    }
                    const double err = area - reference_area;
                    if (std::abs(err) < 1e-12 * reference_area) break;
                    s -= (err / darea.squaredNorm()) * darea;
                }
                return s;
            };

            try {
                current = apply_boundary_update(current, project_area(boundary_opt.propose(grad)),
                                                margin);
                last_skipped = false;
            } catch (const std::runtime_error&) {
                trace.skipped_boundary_updates += 1;
                boundary_opt.reset();
                last_skipped = true;
            }
            // The guards inside the update may rescale individual vertices and
            // break the constraint again; restore it with pure normal-direction
            // corrections, which are smooth and almost never rescaled.
            for (int fix = 0; fix < 3; ++fix) {
                if (std::abs(signed_area(current) - reference_area) <=
                    1e-9 * reference_area)
                    break;
                try {
                    current = apply_boundary_update(
                        current, project_area(Eigen::VectorXd::Zero(2 * n_b)), margin);
                } catch (const std::runtime_error&) {
                    break;
                }
            }

            const auto interior = interior_optimize(current, config.mesh_weights, reference_area,
                                                    config.interior_step, config.m_inner,
                                                    config.optimizer == FirstOrderMethod::Adam
                                                        ? InteriorMethod::Adam
                                                        : InteriorMethod::GradientDescent,
                                                    margin);
            current = interior.mesh;

            breakdown = evaluate_energy_area(current, config.problem);
            solves += 1;
            last_evaluated = current;

            trace.iterations.push_back({k, start_energy, j0, interior.report.total, start_area,
                                        grad.norm(), solves});
            if (config.snapshot_every > 0 && (k + 1) % config.snapshot_every == 0)
                trace.snapshots.emplace_back(k + 1, current);
        } catch (const std::exception& e) {
            trace.stop_reason = StopReason::Error;
            trace.error_message = e.what();
            break;
        }
    }

    // On error the last mesh/energy pair that was actually solved is reported,
    // so the trace stays internally consistent.
    trace.final_mesh = trace.stop_reason == StopReason::Error ? last_evaluated : current;
    trace.final_energy = breakdown.energy;
    trace.total_pde_solves = solves;
    return trace;
}

FdGradientResult fd_full_mesh_gradient(const Mesh& mesh,
                                       const std::function<double(const Mesh&)>& objective,
                                       double step) {
    if (!(step > 0.0)) throw std::invalid_argument("fd_full_mesh_gradient: step must be positive");
    const int n = static_cast<int>(mesh.vertices.size());
    FdGradientResult result;
    result.gradient.resize(n, 2);
    result.evaluations = 0;

    for (int v = 0; v < n; ++v) {
        for (int c = 0; c < 2; ++c) {
            auto shifted = [&](double delta) {
                auto verts = mesh.vertices;
                (c == 0 ? verts[v].x : verts[v].y) += delta;
                return objective(mesh.with_vertices(std::move(verts)));
            };
            double plus, minus;
            try {
                plus = shifted(step);
                minus = shifted(-step);
            } catch (const std::exception& e) {
                throw std::runtime_error("fd_full_mesh_gradient: evaluation failed at vertex " +
                                         std::to_string(v) + " coord " + std::to_string(c) + ": " +
                                         e.what());
            }
            result.evaluations += 2;
            result.gradient(v, c) = (plus - minus) / (2.0 * step);
        }
    }
    return result;
}

} // namespace acoustics
