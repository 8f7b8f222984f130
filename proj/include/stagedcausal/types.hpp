#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace stagedcausal {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A categorical variable: a name plus an ordered list of level labels.
struct Variable {
    std::string name;
    std::vector<std::string> levels;

    int arity() const { return static_cast<int>(levels.size()); }
    int level_code(const std::string& label) const;
};

/// Identifies an internal node: the value prefix preceding `variable`.
struct Context {
    int variable = 0;
    std::vector<int> prefix;
};

/// Event tree over an ordered sequence of categorical variables. Contexts
/// are addressed by their mixed-radix rank in lexicographic (canonical)
/// order over level codes; rank 0 for variable 0 is the root context.
class EventTree {
public:
    explicit EventTree(std::vector<Variable> variables);

    int num_variables() const { return static_cast<int>(vars_.size()); }
    const Variable& variable(int i) const { return vars_.at(i); }
    const std::vector<Variable>& variables() const { return vars_; }
    int variable_index(const std::string& name) const;

    /// Number of contexts of variable i in the full (symmetric) tree.
    std::uint64_t full_context_count(int var) const;
    std::uint64_t leaf_count() const;

    bool is_pruned() const { return pruned_; }
    bool context_observed(int var, std::uint64_t rank) const;
    /// Retained context ranks of variable `var`, ascending.
    std::vector<std::uint64_t> context_ranks(int var) const;
    std::uint64_t num_contexts(int var) const;

    std::uint64_t rank_of(int var, std::span<const int> prefix) const;
    std::vector<int> prefix_of(int var, std::uint64_t rank) const;

    /// Returns a copy with the given per-variable retained context sets.
    EventTree with_observed(std::vector<std::unordered_set<std::uint64_t>> observed) const;

private:
    std::vector<Variable> vars_;
    bool pruned_ = false;
    std::vector<std::unordered_set<std::uint64_t>> observed_;
};

EventTree build_event_tree(const std::vector<Variable>& schema);

/// Complete categorical observations, level-coded against a schema that
/// must match the event tree the data is used with.
class Dataset {
public:
    Dataset(std::vector<Variable> schema, std::vector<std::vector<int>> rows);

    const std::vector<Variable>& schema() const { return schema_; }
    const std::vector<std::vector<int>>& rows() const { return rows_; }
    const std::vector<int>& row(std::size_t i) const { return rows_.at(i); }
    std::uint64_t size() const { return rows_.size(); }
    int num_variables() const { return static_cast<int>(schema_.size()); }

    bool schema_matches(const EventTree& tree) const;

private:
    std::vector<Variable> schema_;
    std::vector<std::vector<int>> rows_;
};

}  // namespace stagedcausal
