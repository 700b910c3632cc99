#include "bbmvote/bbm.hpp"

#include <cstdio>

namespace bbmvote {

double expected_population(const GenealogyParams& params, double t) {
    if (t < 0.0) throw ValidationError("expected_population requires t >= 0");
    return std::exp(params.rate * (params.offspring.mean_children() - 1.0) * t);
}

namespace {

std::string format_position(const std::vector<double>& pos) {
    std::string out = "(";
    char buf[32];
    for (size_t i = 0; i < pos.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6g", pos[i]);
        if (i) out += ", ";
        out += buf;
    }
    return out + ")";
}

std::string indent_block(const std::string& block) {
    std::string out;
    size_t start = 0;
    while (start < block.size()) {
        size_t end = block.find('\n', start);
        if (end == std::string::npos) end = block.size();
        if (!out.empty()) out += "\n";
        out += "  " + block.substr(start, end - start);
        start = end + 1;
    }
    return out;
}

}  // namespace

std::string dump_tree(const GenealogyParams& params, double t, std::span<const double> x0,
                      NodeRng root, const FoldLimits& limits) {
    auto leaf = [&](const LeafRecord& rec, NodeRng&) -> std::string {
        char buf[64];
        std::snprintf(buf, sizeof buf, "leaf t=%.6g x=", rec.time);
        return buf + format_position(rec.position);
    };
    auto combine = [&](const BranchRecord& rec, std::span<std::string> children,
                       NodeRng&) -> std::string {
        char buf[80];
        std::snprintf(buf, sizeof buf, "branch t=%.6g arity=%d x=", rec.time, rec.arity);
        std::string out = buf + format_position(rec.position);
        for (const auto& child : children) out += "\n" + indent_block(child);
        return out;
    };
    return fold_tree(params, t, x0, root, leaf, combine, limits) + "\n";
}

}  // namespace bbmvote
