#include "stagedcausal/types.hpp"

#include <algorithm>
#include <unordered_set>

namespace stagedcausal {

int Variable::level_code(const std::string& label) const {
    for (int k = 0; k < arity(); ++k) {
        if (levels[k] == label) return k;
    }
    throw DataError("unknown level '" + label + "' for variable '" + name + "'");
}

EventTree::EventTree(std::vector<Variable> variables) : vars_(std::move(variables)) {}

EventTree build_event_tree(const std::vector<Variable>& schema) {
    if (schema.empty()) throw SchemaError("schema must contain at least one variable");
    std::unordered_set<std::string> names;
    for (const auto& v : schema) {
        if (v.arity() < 2)
            throw SchemaError("variable '" + v.name + "' must have arity >= 2");
        if (!names.insert(v.name).second)
            throw SchemaError("duplicate variable name '" + v.name + "'");
        std::unordered_set<std::string> labels;
        for (const auto& l : v.levels) {
            if (!labels.insert(l).second)
                throw SchemaError("duplicate level '" + l + "' in variable '" + v.name + "'");
        }
    }
    return EventTree(schema);
}

int EventTree::variable_index(const std::string& name) const {
    for (int i = 0; i < num_variables(); ++i) {
        if (vars_[i].name == name) return i;
    }
    throw SchemaError("no variable named '" + name + "'");
}

std::uint64_t EventTree::full_context_count(int var) const {
    std::uint64_t n = 1;
    for (int j = 0; j < var; ++j) {
        const std::uint64_t a = static_cast<std::uint64_t>(vars_.at(j).arity());
        if (n > UINT64_MAX / a) throw ModelError("context space too large");
        n *= a;
    }
    return n;
}

std::uint64_t EventTree::leaf_count() const {
    return full_context_count(num_variables() - 1) *
           static_cast<std::uint64_t>(vars_.back().arity());
}

bool EventTree::context_observed(int var, std::uint64_t rank) const {
    if (!pruned_) return rank < full_context_count(var);
    return observed_.at(var).count(rank) > 0;
}

std::vector<std::uint64_t> EventTree::context_ranks(int var) const {
    std::vector<std::uint64_t> out;
    if (!pruned_) {
        const std::uint64_t n = full_context_count(var);
        out.reserve(n);
        for (std::uint64_t r = 0; r < n; ++r) out.push_back(r);
    } else {
        out.assign(observed_.at(var).begin(), observed_.at(var).end());
        std::sort(out.begin(), out.end());
    }
    return out;
}

std::uint64_t EventTree::num_contexts(int var) const {
    if (!pruned_) return full_context_count(var);
    return observed_.at(var).size();
}

std::uint64_t EventTree::rank_of(int var, std::span<const int> prefix) const {
    if (static_cast<int>(prefix.size()) != var)
        throw ModelError("prefix length does not match variable index");
    std::uint64_t r = 0;
    for (int j = 0; j < var; ++j) {
        const int a = vars_.at(j).arity();
        if (prefix[j] < 0 || prefix[j] >= a)
            throw DataError("invalid level code in context prefix");
        r = r * static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(prefix[j]);
    }
    return r;
}

std::vector<int> EventTree::prefix_of(int var, std::uint64_t rank) const {
    std::vector<int> prefix(var, 0);
    for (int j = var - 1; j >= 0; --j) {
        const auto a = static_cast<std::uint64_t>(vars_.at(j).arity());
        prefix[j] = static_cast<int>(rank % a);
        rank /= a;
    }
    if (rank != 0) throw ModelError("context rank out of range");
    return prefix;
}

EventTree EventTree::with_observed(
    std::vector<std::unordered_set<std::uint64_t>> observed) const {
    EventTree t(vars_);
    t.pruned_ = true;
    t.observed_ = std::move(observed);
    if (static_cast<int>(t.observed_.size()) != num_variables())
        throw ModelError("observed context sets must cover every variable");
    return t;
}

Dataset::Dataset(std::vector<Variable> schema, std::vector<std::vector<int>> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
    const int p = static_cast<int>(schema_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (static_cast<int>(rows_[i].size()) != p)
            throw DataError("row " + std::to_string(i) + " has wrong length");
        for (int j = 0; j < p; ++j) {
            if (rows_[i][j] < 0 || rows_[i][j] >= schema_[j].arity())
                throw DataError("row " + std::to_string(i) + ", column '" +
                                schema_[j].name + "': level code out of range");
        }
    }
}

bool Dataset::schema_matches(const EventTree& tree) const {
    if (num_variables() != tree.num_variables()) return false;
    for (int i = 0; i < num_variables(); ++i) {
        if (schema_[i].name != tree.variable(i).name) return false;
        if (schema_[i].levels != tree.variable(i).levels) return false;
    }
    return true;
}

}  // namespace stagedcausal
