#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stagedcausal/inference.hpp"
#include "stagedcausal/model.hpp"

namespace stagedcausal {

/// RFC-4180 CSV with a header row; levels are inferred in first-appearance
/// order unless a schema is supplied. Column order follows the file; use
/// reorder_dataset to impose the causal variable order.
Dataset read_csv(std::istream& in, const std::optional<std::vector<Variable>>& schema =
                                       std::nullopt);
Dataset read_csv_file(const std::string& path,
                      const std::optional<std::vector<Variable>>& schema = std::nullopt);
void write_csv(std::ostream& out, const Dataset& data);

/// Returns the dataset with columns permuted into the named order.
Dataset reorder_dataset(const Dataset& data, const std::vector<std::string>& order);

std::string model_to_json(const StagedTreeModel& model);
StagedTreeModel model_from_json(const std::string& text);
void write_model(const std::string& path, const StagedTreeModel& model);
StagedTreeModel read_model(const std::string& path);

std::vector<Variable> schema_from_json(const std::string& text);

struct DotOptions {
    bool show_probs = false;
    bool highlight_positivity = false;
};

/// DOT rendering: one node per context plus leaves, stage-keyed fill colors
/// from a fixed 12-color palette, pruned branches omitted.
std::string export_dot(const StagedTreeModel& model, const DotOptions& options = {});

void write_distribution_csv(std::ostream& out, const DistributionTable& table,
                            const EventTree& tree);
void write_replicates_csv(std::ostream& out, const std::vector<double>& replicates);

}  // namespace stagedcausal
