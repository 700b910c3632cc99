#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "bbmvote/errors.hpp"
#include "bbmvote/models.hpp"

namespace bbmvote {

// All Brownian motions run with diffusivity sqrt(2), so the generator is the
// plain Laplacian.
inline constexpr double kDiffusivity = std::numbers::sqrt2_v<double>;

struct GenealogyParams {
    double rate = 1.0;  // branching events per unit time; 0 = pure diffusion
    OffspringDistribution offspring;
    int dimension = 1;
};

// Counter-based random stream.  A stream is identified by a 64-bit key; the
// i-th draw is a hash of (key, i), so draws depend only on the key, never on
// traversal order.  Child and sibling streams are derived by rehashing.
class NodeRng {
  public:
    explicit NodeRng(std::uint64_t key) : key_(key) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    static std::uint64_t combine(std::uint64_t a, std::uint64_t b) { return mix(mix(a) + b); }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() { return combine(key_, ++counter_); }

    // Uniform on (0, 1]; never returns 0, so logs are safe.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }
    // Uniform on [0, 1).
    double next_unit_co() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_exponential(double rate) { return -std::log(next_unit()) / rate; }

    // Box-Muller; consumes exactly two uniforms per call.
    double next_gaussian() {
        double u1 = next_unit();
        double u2 = next_unit_co();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi_v<double> * u2);
    }

    // Stream of the index-th child node.
    NodeRng child(std::uint64_t index) const {
        return NodeRng(combine(key_, 0x8BADF00D5EEDull + index));
    }
    // Disjoint sibling stream of this node (structure vs. user draws).
    NodeRng stream(std::uint64_t salt) const { return NodeRng(combine(key_, ~salt)); }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Replicate streams derive from (master_seed, replicate_index); node streams
// derive from the replicate stream and the child-index path from the root.
struct SeedScheme {
    std::uint64_t master_seed = 0;

    NodeRng replicate_root(std::int64_t replicate_index) const {
        return NodeRng(
            NodeRng::combine(NodeRng::combine(master_seed, 0xC0FFEEull),
                             static_cast<std::uint64_t>(replicate_index)));
    }
};

struct LeafRecord {
    const std::vector<double>& position;
    const std::vector<std::uint32_t>& path;  // child indices from the root
    double time;
};

struct BranchRecord {
    int arity;
    double time;  // absolute time of the branching event
    const std::vector<double>& position;
    int depth;
};

struct FoldLimits {
    std::size_t max_leaves = 1'000'000;
    int max_depth = 10'000;
};

// Expected particle count e^(beta (m1 - 1) t); used to size the population
// guard before launching a run.
double expected_population(const GenealogyParams& params, double t);

namespace detail {

template <class Leaf, class Combine>
class TreeFold {
  public:
    using Value = std::invoke_result_t<Leaf&, const LeafRecord&, NodeRng&>;

    TreeFold(const GenealogyParams& params, double horizon, std::span<const double> x0,
             Leaf& leaf_fn, Combine& combine_fn, const FoldLimits& limits)
        : params_(params),
          horizon_(horizon),
          leaf_fn_(leaf_fn),
          combine_fn_(combine_fn),
          limits_(limits),
          position_(x0.begin(), x0.end()) {}

    Value run(NodeRng node) { return walk(node, horizon_, 0); }

  private:
    static constexpr std::uint64_t kStructuralSalt = 0x5712AC3Bull;
    static constexpr std::uint64_t kUserSalt = 0x9E11A77Eull;

    void advance_position(NodeRng& rng, double dt) {
        const double sigma = kDiffusivity * std::sqrt(dt);
        for (double& c : position_) c += sigma * rng.next_gaussian();
    }

    Value walk(NodeRng node, double remaining, int depth) {
        if (depth > limits_.max_depth)
            throw ResourceError("genealogy recursion exceeded depth " +
                                std::to_string(limits_.max_depth));
        NodeRng structural = node.stream(kStructuralSalt);
        NodeRng user = node.stream(kUserSalt);
        const double tau = params_.rate > 0.0
                               ? structural.next_exponential(params_.rate)
                               : std::numeric_limits<double>::infinity();
        if (tau >= remaining) {
            advance_position(structural, remaining);
            if (++leaves_ > limits_.max_leaves)
                throw ResourceError(
                    "population guard tripped: more than " + std::to_string(limits_.max_leaves) +
                    " leaves in one replicate; check expected_population before raising the cap");
            LeafRecord leaf{position_, path_, horizon_};
            return leaf_fn_(leaf, user);
        }
        advance_position(structural, tau);
        const int n = params_.offspring.sample(structural.next_unit_co());
        const std::vector<double> branch_position = position_;
        std::vector<Value> children;
        children.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            position_ = branch_position;
            path_.push_back(static_cast<std::uint32_t>(i));
            children.push_back(walk(node.child(static_cast<std::uint64_t>(i)), remaining - tau,
                                    depth + 1));
            path_.pop_back();
        }
        position_ = branch_position;
        BranchRecord branch{n, horizon_ - remaining + tau, position_, depth};
        return combine_fn_(branch, std::span<Value>(children), user);
    }

    const GenealogyParams& params_;
    double horizon_;
    Leaf& leaf_fn_;
    Combine& combine_fn_;
    FoldLimits limits_;
    std::vector<double> position_;
    std::vector<std::uint32_t> path_;
    std::size_t leaves_ = 0;
};

}  // namespace detail

// Samples one genealogical tree depth-first and folds it: leaf_fn maps a
// LeafRecord to a value, combine_fn maps a branch and its child values to a
// value.  The returned value belongs to the root.  Trees never materialize;
// identical (seed, path) always sees identical randomness.
template <class Leaf, class Combine>
auto fold_tree(const GenealogyParams& params, double t, std::span<const double> x0, NodeRng root,
               Leaf&& leaf_fn, Combine&& combine_fn, const FoldLimits& limits = {}) {
    if (t < 0.0) throw ValidationError("fold_tree requires t >= 0");
    if (params.dimension != static_cast<int>(x0.size()))
        throw ValidationError("start position dimension mismatch");
    detail::TreeFold<Leaf, Combine> fold(params, t, x0, leaf_fn, combine_fn, limits);
    return fold.run(root);
}

// Indented text outline of one sampled tree (debugging aid).
std::string dump_tree(const GenealogyParams& params, double t, std::span<const double> x0,
                      NodeRng root, const FoldLimits& limits = {});

}  // namespace bbmvote
