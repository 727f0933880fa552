#include "wisp/exact.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "wisp/errors.hpp"

namespace wisp::exact {

namespace {

void check_threshold_range(const ServiceParams& p, int R, const char* who) {
    if (R < 0 || R > p.s_max - 1) {
        std::ostringstream os;
        os << who << ": threshold " << R << " outside [0, " << p.s_max - 1 << "]";
        throw ConfigError(os.str());
    }
}

}  // namespace

double StationaryDist::mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k)
        m += static_cast<double>(offset + static_cast<int>(k)) * probs[k];
    return m;
}

StationaryDist stationary_dist(const ServiceParams& p, int R) {
    check_threshold_range(p, R, "stationary_dist");
    const double rho = p.lambda / p.mu;
    StationaryDist d;
    d.offset = R;
    d.probs.resize(static_cast<std::size_t>(p.s_max - R + 1));
    double term = 1.0;
    d.probs[0] = term;
    for (int l = 1; l <= p.s_max - R; ++l) {
        term *= rho / static_cast<double>(R + l);
        d.probs[static_cast<std::size_t>(l)] = term;
    }
    const double z = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
    for (auto& q : d.probs) q /= z;
    return d;
}

StationaryDist stationary_solve(const ServiceParams& p, int R) {
    check_threshold_range(p, R, "stationary_solve");
    // Global balance on the truncated chain: pi Q = 0, sum pi = 1. States
    // below R are transient and come out as zeros.
    const int n = p.s_max + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);  // A = Q^T with a normalization row
    ThresholdPolicy pol{R};
    for (int s = 0; s < n; ++s) {
        auto r = rates(p, s, pol.active_at(s));
        double out = 0.0;
        if (r.birth > 0) {
            A(s + 1, s) += r.birth;
            out += r.birth;
        }
        if (r.death > 0) {
            A(s - 1, s) += r.death;
            out += r.death;
        }
        A(s, s) -= out;
    }
    A.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::VectorXd pi = A.partialPivLu().solve(b);
    StationaryDist d;
    d.offset = R;
    d.probs.assign(static_cast<std::size_t>(n - R), 0.0);
    for (int s = R; s < n; ++s) d.probs[static_cast<std::size_t>(s - R)] = std::max(pi(s), 0.0);
    return d;
}

double expected_cost(const ServiceParams& p, int R) {
    const auto d = stationary_dist(p, R);
    double c = 0.0;
    for (int s = R; s <= p.s_max; ++s) c += cost(p, s) * d.at(s);
    return c;
}

double passive_mass(const ServiceParams& p, int R) { return stationary_dist(p, R).at(R); }

double threshold_avg_cost(const ServiceParams& p, int R, double subsidy) {
    return expected_cost(p, R) - subsidy * passive_mass(p, R);
}

ThresholdProfile threshold_profile(const ServiceParams& p) {
    ThresholdProfile t;
    t.expected_cost.resize(static_cast<std::size_t>(p.s_max));
    t.passive_mass.resize(static_cast<std::size_t>(p.s_max));
    for (int R = 0; R < p.s_max; ++R) {
        const auto d = stationary_dist(p, R);
        double c = 0.0;
        for (int s = R; s <= p.s_max; ++s) c += cost(p, s) * d.at(s);
        t.expected_cost[static_cast<std::size_t>(R)] = c;
        t.passive_mass[static_cast<std::size_t>(R)] = d.at(R);
    }
    return t;
}

int ThresholdProfile::best(double subsidy) const {
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t R = 0; R < expected_cost.size(); ++R) {
        const double h = expected_cost[R] - subsidy * passive_mass[R];
        if (h < best - 1e-15) {
            best = h;
            arg = static_cast<int>(R);
        }
    }
    return arg;
}

ThresholdPolicy best_threshold(const ServiceParams& p, double subsidy) {
    if (subsidy < 0) throw ConfigError("best_threshold: subsidy must be >= 0");
    return ThresholdPolicy{threshold_profile(p).best(subsidy)};
}

SingleServiceSolution solve_single_service(const ServiceParams& p, double subsidy,
                                           const SolveOptions& opts) {
    const int n = p.s_max + 1;
    const double uni = p.lambda + p.mu * static_cast<double>(p.s_max);
    std::vector<double> v(static_cast<std::size_t>(n), 0.0), w(static_cast<std::size_t>(n));
    SingleServiceSolution sol;
    sol.active.assign(static_cast<std::size_t>(n), 0);

    for (long long it = 1; it <= opts.max_iterations; ++it) {
        for (int s = 0; s < n; ++s) {
            const double up = (s < p.s_max) ? v[static_cast<std::size_t>(s + 1)] : v[static_cast<std::size_t>(s)];
            const double dn = (s > 0) ? v[static_cast<std::size_t>(s - 1)] : v[static_cast<std::size_t>(s)];
            const double pb = ((s < p.s_max) ? p.lambda : 0.0) / uni;
            const double pd = p.mu * static_cast<double>(s) / uni;
            const double q_passive = (cost(p, s) - subsidy) / uni + pb * up + (1.0 - pb) * v[static_cast<std::size_t>(s)];
            const double q_active = cost(p, s) / uni + pb * up + pd * dn + (1.0 - pb - pd) * v[static_cast<std::size_t>(s)];
            if (q_active < q_passive) {
                w[static_cast<std::size_t>(s)] = q_active;
                sol.active[static_cast<std::size_t>(s)] = 1;
            } else {
                w[static_cast<std::size_t>(s)] = q_passive;
                sol.active[static_cast<std::size_t>(s)] = 0;
            }
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int s = 0; s < n; ++s) {
            const double d = w[static_cast<std::size_t>(s)] - v[static_cast<std::size_t>(s)];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        const double ref = w[0];
        for (int s = 0; s < n; ++s) v[static_cast<std::size_t>(s)] = w[static_cast<std::size_t>(s)] - ref;
        sol.iterations = it;
        if (hi - lo < opts.tol) {
            sol.average_cost = 0.5 * (hi + lo) * uni;
            sol.value = v;
            // Threshold structure: passive exactly on a prefix of states.
            int R = -1;
            while (R + 1 < n && sol.active[static_cast<std::size_t>(R + 1)] == 0) ++R;
            sol.threshold = R;
            sol.threshold_structured = true;
            for (int s = R + 1; s < n; ++s)
                if (sol.active[static_cast<std::size_t>(s)] == 0) sol.threshold_structured = false;
            return sol;
        }
    }
    throw ConvergenceError("solve_single_service: relative value iteration did not converge", 0.0);
}

StateSpace::StateSpace(const SystemConfig& cfg) {
    dims_.reserve(cfg.services.size());
    for (const auto& s : cfg.services) dims_.push_back(s.s_max + 1);
    strides_.assign(dims_.size(), 1);
    for (int i = static_cast<int>(dims_.size()) - 2; i >= 0; --i)
        strides_[static_cast<std::size_t>(i)] =
            strides_[static_cast<std::size_t>(i + 1)] * dims_[static_cast<std::size_t>(i + 1)];
    size_ = strides_.empty() ? 0 : strides_[0] * dims_[0];
}

long long StateSpace::encode(const std::vector<int>& queues) const {
    long long idx = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) idx += queues[i] * strides_[i];
    return idx;
}

void StateSpace::decode(long long index, std::vector<int>& queues) const {
    queues.resize(dims_.size());
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        queues[i] = static_cast<int>(index / strides_[i]);
        index %= strides_[i];
    }
}

namespace {

struct JointWorkspace {
    StateSpace space;
    double uni;
    std::vector<double> state_cost;  // per encoded state, in per-step units

    explicit JointWorkspace(const SystemConfig& cfg) : space(cfg) {
        uni = 0.0;
        for (const auto& s : cfg.services) uni += s.lambda + s.mu * static_cast<double>(s.s_max);
        state_cost.assign(static_cast<std::size_t>(space.size()), 0.0);
        std::vector<int> q;
        for (long long x = 0; x < space.size(); ++x) {
            space.decode(x, q);
            double c = 0.0;
            for (int i = 0; i < cfg.size(); ++i) c += cost(cfg.services[i], q[i]);
            state_cost[static_cast<std::size_t>(x)] = c / uni;
        }
    }
};

}  // namespace

DpSolution value_iteration(const SystemConfig& cfg, const ValueIterationOptions& opts) {
    cfg.validate();
    JointWorkspace ws(cfg);
    const long long n = ws.space.size();
    if (n > opts.work_budget)
        throw ResourceError("value_iteration: state space of " + std::to_string(n) +
                            " states already exceeds the work budget");

    const int N = cfg.size();
    const int K = cfg.capacity;
    std::vector<double> v(static_cast<std::size_t>(n), 0.0), w(static_cast<std::size_t>(n));
    std::vector<int> q(static_cast<std::size_t>(N));
    std::vector<double> delta(static_cast<std::size_t>(N));

    DpSolution sol;
    for (long long it = 1;; ++it) {
        if (it > opts.max_iterations)
            throw ConvergenceError("value_iteration: exceeded max iterations, span=" +
                                       std::to_string(sol.final_span),
                                   sol.final_span);
        if (it * n > opts.work_budget)
            throw ResourceError("value_iteration: states*iterations budget exhausted, span=" +
                                std::to_string(sol.final_span));

        for (long long x = 0; x < n; ++x) {
            ws.space.decode(x, q);
            const double vx = v[static_cast<std::size_t>(x)];
            double acc = ws.state_cost[static_cast<std::size_t>(x)] + vx;
            for (int i = 0; i < N; ++i) {
                const auto& sp = cfg.services[static_cast<std::size_t>(i)];
                if (q[static_cast<std::size_t>(i)] < sp.s_max)
                    acc += sp.lambda / ws.uni *
                           (v[static_cast<std::size_t>(x + ws.space.stride(i))] - vx);
                delta[static_cast<std::size_t>(i)] =
                    (q[static_cast<std::size_t>(i)] > 0)
                        ? sp.mu * q[static_cast<std::size_t>(i)] / ws.uni *
                              (v[static_cast<std::size_t>(x - ws.space.stride(i))] - vx)
                        : 0.0;
            }
            // Keep the K most negative activation terms.
            if (K == 1) {
                double best = 0.0;
                for (int i = 0; i < N; ++i) best = std::min(best, delta[static_cast<std::size_t>(i)]);
                acc += best;
            } else {
                std::sort(delta.begin(), delta.end());
                for (int i = 0; i < K; ++i) {
                    if (delta[static_cast<std::size_t>(i)] >= 0.0) break;
                    acc += delta[static_cast<std::size_t>(i)];
                }
            }
            w[static_cast<std::size_t>(x)] = acc;
        }

        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (long long x = 0; x < n; ++x) {
            const double d = w[static_cast<std::size_t>(x)] - v[static_cast<std::size_t>(x)];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        sol.final_span = hi - lo;
        const double ref = w[0];
        for (long long x = 0; x < n; ++x) v[static_cast<std::size_t>(x)] = w[static_cast<std::size_t>(x)] - ref;
        sol.iterations = it;
        if (sol.final_span < opts.tol) {
            sol.average_cost = 0.5 * (hi + lo) * ws.uni;
            break;
        }
    }

    // Recover the minimizing action map from the converged values.
    sol.value = v;
    sol.action.resize(static_cast<std::size_t>(n));
    std::vector<std::pair<double, int>> ranked(static_cast<std::size_t>(N));
    for (long long x = 0; x < n; ++x) {
        ws.space.decode(x, q);
        const double vx = v[static_cast<std::size_t>(x)];
        PlacementAction a = PlacementAction::none(N);
        for (int i = 0; i < N; ++i) {
            const auto& sp = cfg.services[static_cast<std::size_t>(i)];
            const double d = (q[static_cast<std::size_t>(i)] > 0)
                                 ? sp.mu * q[static_cast<std::size_t>(i)] / ws.uni *
                                       (v[static_cast<std::size_t>(x - ws.space.stride(i))] - vx)
                                 : 0.0;
            ranked[static_cast<std::size_t>(i)] = {d, i};
        }
        std::sort(ranked.begin(), ranked.end());
        for (int k = 0; k < K; ++k) {
            if (ranked[static_cast<std::size_t>(k)].first >= -1e-15) break;
            a.active[static_cast<std::size_t>(ranked[static_cast<std::size_t>(k)].second)] = 1;
        }
        sol.action[static_cast<std::size_t>(x)] = std::move(a);
    }
    return sol;
}

namespace {

// Outgoing transitions of the policy-fixed joint chain.
struct Transition {
    long long to;
    double rate;
};

void policy_transitions(const SystemConfig& cfg, const StateSpace& space, long long x,
                        std::vector<int>& q, const PolicyFn& policy, std::vector<Transition>& out) {
    out.clear();
    space.decode(x, q);
    SystemState st{q};
    PlacementAction a = policy(st);
    if (a.size() != cfg.size() || a.count() > cfg.capacity)
        throw ProtocolError("exact_policy_cost: policy returned an infeasible action");
    for (int i = 0; i < cfg.size(); ++i) {
        auto r = rates(cfg.services[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(i)],
                       a.active[static_cast<std::size_t>(i)] != 0);
        if (r.birth > 0) out.push_back({x + space.stride(i), r.birth});
        if (r.death > 0) out.push_back({x - space.stride(i), r.death});
    }
}

// Closed communicating classes via Tarjan SCC (iterative).
std::vector<std::vector<long long>> closed_classes(long long n,
                                                   const std::vector<std::vector<long long>>& adj) {
    std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
    std::vector<std::uint8_t> onstack(static_cast<std::size_t>(n), 0);
    std::vector<long long> stack;
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int next_index = 0, ncomp = 0;

    struct Frame {
        long long v;
        std::size_t child;
    };
    std::vector<Frame> dfs;
    for (long long root = 0; root < n; ++root) {
        if (index[static_cast<std::size_t>(root)] != -1) continue;
        dfs.push_back({root, 0});
        index[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = next_index++;
        stack.push_back(root);
        onstack[static_cast<std::size_t>(root)] = 1;
        while (!dfs.empty()) {
            auto& f = dfs.back();
            if (f.child < adj[static_cast<std::size_t>(f.v)].size()) {
                long long u = adj[static_cast<std::size_t>(f.v)][f.child++];
                if (index[static_cast<std::size_t>(u)] == -1) {
                    index[static_cast<std::size_t>(u)] = low[static_cast<std::size_t>(u)] = next_index++;
                    stack.push_back(u);
                    onstack[static_cast<std::size_t>(u)] = 1;
                    dfs.push_back({u, 0});
                } else if (onstack[static_cast<std::size_t>(u)]) {
                    low[static_cast<std::size_t>(f.v)] =
                        std::min(low[static_cast<std::size_t>(f.v)], index[static_cast<std::size_t>(u)]);
                }
            } else {
                if (low[static_cast<std::size_t>(f.v)] == index[static_cast<std::size_t>(f.v)]) {
                    while (true) {
                        long long u = stack.back();
                        stack.pop_back();
                        onstack[static_cast<std::size_t>(u)] = 0;
                        comp[static_cast<std::size_t>(u)] = ncomp;
                        if (u == f.v) break;
                    }
                    ++ncomp;
                }
                long long v = f.v;
                dfs.pop_back();
                if (!dfs.empty())
                    low[static_cast<std::size_t>(dfs.back().v)] =
                        std::min(low[static_cast<std::size_t>(dfs.back().v)], low[static_cast<std::size_t>(v)]);
            }
        }
    }

    std::vector<std::uint8_t> closed(static_cast<std::size_t>(ncomp), 1);
    for (long long v = 0; v < n; ++v)
        for (long long u : adj[static_cast<std::size_t>(v)])
            if (comp[static_cast<std::size_t>(u)] != comp[static_cast<std::size_t>(v)])
                closed[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])] = 0;

    std::vector<std::vector<long long>> classes(static_cast<std::size_t>(ncomp));
    for (long long v = 0; v < n; ++v)
        if (closed[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])])
            classes[static_cast<std::size_t>(comp[static_cast<std::size_t>(v)])].push_back(v);
    std::erase_if(classes, [](const auto& c) { return c.empty(); });
    return classes;
}

}  // namespace

PolicyCost exact_policy_cost(const SystemConfig& cfg, const PolicyFn& policy) {
    cfg.validate();
    StateSpace space(cfg);
    const long long n = space.size();
    std::vector<int> q;
    std::vector<Transition> trans;
    std::vector<std::vector<long long>> adj(static_cast<std::size_t>(n));
    std::vector<std::vector<Transition>> alltrans(static_cast<std::size_t>(n));
    for (long long x = 0; x < n; ++x) {
        policy_transitions(cfg, space, x, q, policy, trans);
        alltrans[static_cast<std::size_t>(x)] = trans;
        adj[static_cast<std::size_t>(x)].reserve(trans.size());
        for (const auto& t : trans) adj[static_cast<std::size_t>(x)].push_back(t.to);
    }

    auto classes = closed_classes(n, adj);
    if (classes.size() != 1) {
        std::ostringstream os;
        os << "exact_policy_cost: policy-induced chain has " << classes.size()
           << " closed classes; representatives:";
        for (const auto& c : classes) {
            space.decode(c.front(), q);
            os << " (";
            for (std::size_t i = 0; i < q.size(); ++i) os << (i ? "," : "") << q[i];
            os << ")";
        }
        throw ConfigError(os.str());
    }

    // Stationary solve restricted to the closed class; transient states get 0.
    const auto& cls = classes.front();
    const long long m = static_cast<long long>(cls.size());
    std::vector<long long> local(static_cast<std::size_t>(n), -1);
    for (long long j = 0; j < m; ++j) local[static_cast<std::size_t>(cls[static_cast<std::size_t>(j)])] = j;

    // A = Q^T restricted to the class, with the last row replaced by ones to
    // impose the normalization.
    Eigen::SparseMatrix<double> A(static_cast<int>(m), static_cast<int>(m));
    {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(m) * 6);
        for (long long j = 0; j < m; ++j) {
            const long long x = cls[static_cast<std::size_t>(j)];
            double out = 0.0;
            for (const auto& t : alltrans[static_cast<std::size_t>(x)]) {
                const long long k = local[static_cast<std::size_t>(t.to)];
                out += t.rate;
                if (k >= 0 && k != m - 1) trip.emplace_back(static_cast<int>(k), static_cast<int>(j), t.rate);
            }
            if (j != m - 1) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), -out);
            trip.emplace_back(static_cast<int>(m - 1), static_cast<int>(j), 1.0);
        }
        A.setFromTriplets(trip.begin(), trip.end());
    }
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw ConvergenceError("exact_policy_cost: stationary solve failed to factorize", 0.0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<int>(m));
    b(static_cast<int>(m - 1)) = 1.0;
    Eigen::VectorXd pi = lu.solve(b);

    PolicyCost pc;
    pc.stationary.assign(static_cast<std::size_t>(n), 0.0);
    for (long long j = 0; j < m; ++j)
        pc.stationary[static_cast<std::size_t>(cls[static_cast<std::size_t>(j)])] = std::max(pi(static_cast<int>(j)), 0.0);
    double total = std::accumulate(pc.stationary.begin(), pc.stationary.end(), 0.0);
    for (auto& v : pc.stationary) v /= total;

    for (long long x = 0; x < n; ++x) {
        const double w = pc.stationary[static_cast<std::size_t>(x)];
        if (w == 0.0) continue;
        space.decode(x, q);
        double c = 0.0;
        bool boundary = false;
        for (int i = 0; i < cfg.size(); ++i) {
            c += cost(cfg.services[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(i)]);
            boundary |= q[static_cast<std::size_t>(i)] == cfg.services[static_cast<std::size_t>(i)].s_max;
        }
        pc.average_cost += w * c;
        if (boundary) pc.boundary_mass += w;
    }
    return pc;
}

RelaxedSolution relaxed_value(const SystemConfig& cfg) { return relaxed_value(cfg, cfg.services); }

RelaxedSolution relaxed_value(const SystemConfig& cfg, const std::vector<ServiceParams>& theta) {
    if (theta.size() != cfg.services.size())
        throw ConfigError("relaxed_value: parameter vector size mismatch");
    for (const auto& p : theta) p.validate();

    const int N = static_cast<int>(theta.size());
    std::vector<ThresholdProfile> prof;
    prof.reserve(theta.size());
    for (const auto& p : theta) prof.push_back(threshold_profile(p));

    auto active_count = [&](double w) {
        double c = 0.0;
        for (int i = 0; i < N; ++i) {
            const int R = prof[static_cast<std::size_t>(i)].best(w);
            c += 1.0 - prof[static_cast<std::size_t>(i)].passive_mass[static_cast<std::size_t>(R)];
        }
        return c;
    };
    auto fill = [&](double w, RelaxedSolution& r) {
        r.subsidy = w;
        r.value = 0.0;
        r.expected_active = 0.0;
        r.thresholds.resize(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) {
            const int R = prof[static_cast<std::size_t>(i)].best(w);
            r.thresholds[static_cast<std::size_t>(i)] = R;
            r.value += prof[static_cast<std::size_t>(i)].expected_cost[static_cast<std::size_t>(R)];
            r.expected_active += 1.0 - prof[static_cast<std::size_t>(i)].passive_mass[static_cast<std::size_t>(R)];
        }
    };

    RelaxedSolution r;
    const double K = static_cast<double>(cfg.capacity);
    if (active_count(0.0) <= K + 1e-12) {
        fill(0.0, r);
        return r;
    }
    double hi = 0.0;
    for (int i = 0; i < N; ++i) hi = std::max(hi, cost(theta[static_cast<std::size_t>(i)], theta[static_cast<std::size_t>(i)].s_max));
    if (active_count(hi) > K) {
        // Even full passivity pressure cannot meet the constraint on average.
        fill(hi, r);
        r.bracketed = false;
        return r;
    }
    double lo = 0.0;
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        if (active_count(mid) <= K)
            hi = mid;
        else
            lo = mid;
    }
    // Evaluate on the cheap side of the crossing so the result stays a lower
    // bound for the constrained problem.
    fill(lo, r);
    return r;
}

}  // namespace wisp::exact
