#include "stagedcausal/io.hpp"

#include <array>
#include <cinttypes>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace stagedcausal {

namespace {

using nlohmann::json;

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted CSV field");
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    if (!any || rows.empty()) throw DataError("empty CSV input");
    return rows;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

json variables_to_json(const std::vector<Variable>& vars) {
    json arr = json::array();
    for (const auto& v : vars) arr.push_back({{"name", v.name}, {"levels", v.levels}});
    return arr;
}

std::vector<Variable> variables_from_json(const json& arr) {
    std::vector<Variable> vars;
    for (const auto& v : arr) {
        Variable var;
        var.name = v.at("name").get<std::string>();
        var.levels = v.at("levels").get<std::vector<std::string>>();
        vars.push_back(std::move(var));
    }
    return vars;
}

std::string prefix_key(const EventTree& tree, int var, std::uint64_t rank) {
    const auto prefix = tree.prefix_of(var, rank);
    std::string key;
    for (int j = 0; j < var; ++j) {
        if (j > 0) key += "|";
        key += tree.variable(j).levels.at(prefix[j]);
    }
    return key;
}

std::uint64_t rank_from_key(const EventTree& tree, int var, const std::string& key) {
    std::vector<int> prefix;
    if (!key.empty()) {
        std::string part;
        std::istringstream ss(key);
        while (std::getline(ss, part, '|')) {
            const int j = static_cast<int>(prefix.size());
            if (j >= var) throw DataError("staging key '" + key + "' is too long");
            prefix.push_back(tree.variable(j).level_code(part));
        }
    }
    if (static_cast<int>(prefix.size()) != var)
        throw DataError("staging key '" + key + "' has wrong length for variable " +
                        std::to_string(var));
    return tree.rank_of(var, prefix);
}

constexpr std::array<const char*, 12> kPalette = {
    "#a6cee3", "#1f78b4", "#b2df8a", "#33a02c", "#fb9a99", "#e31a1c",
    "#fdbf6f", "#ff7f00", "#cab2d6", "#6a3d9a", "#ffff99", "#b15928"};

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

Dataset read_csv(std::istream& in, const std::optional<std::vector<Variable>>& schema) {
    auto cells = parse_csv(in);
    const auto& header = cells.front();
    const int p = static_cast<int>(header.size());
    if (p == 0) throw DataError("CSV header is empty");

    std::vector<Variable> vars;
    std::vector<std::unordered_map<std::string, int>> codes(p);
    if (schema) {
        std::unordered_map<std::string, const Variable*> by_name;
        for (const auto& v : *schema) by_name[v.name] = &v;
        for (const auto& name : header) {
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw DataError("CSV column '" + name + "' not present in schema");
            vars.push_back(*it->second);
        }
    } else {
        for (const auto& name : header) vars.push_back({name, {}});
    }
    for (int j = 0; j < p; ++j)
        for (int k = 0; k < static_cast<int>(vars[j].levels.size()); ++k)
            codes[j][vars[j].levels[k]] = k;

    std::vector<std::vector<int>> rows;
    rows.reserve(cells.size() - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (static_cast<int>(cells[i].size()) != p)
            throw DataError("row " + std::to_string(i) + " has " +
                            std::to_string(cells[i].size()) + " fields, expected " +
                            std::to_string(p));
        std::vector<int> row(p);
        for (int j = 0; j < p; ++j) {
            const std::string& label = cells[i][j];
            auto it = codes[j].find(label);
            if (it == codes[j].end()) {
                if (schema)
                    throw DataError("row " + std::to_string(i) + ", column '" + header[j] +
                                    "': label '" + label + "' not in schema");
                const int code = static_cast<int>(vars[j].levels.size());
                vars[j].levels.push_back(label);
                it = codes[j].emplace(label, code).first;
            }
            row[j] = it->second;
        }
        rows.push_back(std::move(row));
    }
    return Dataset(std::move(vars), std::move(rows));
}

Dataset read_csv_file(const std::string& path,
                      const std::optional<std::vector<Variable>>& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& data) {
    const auto& schema = data.schema();
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (j > 0) out << ',';
        out << csv_escape(schema[j].name);
    }
    out << '\n';
    for (const auto& row : data.rows()) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out << ',';
            out << csv_escape(schema[j].levels.at(row[j]));
        }
        out << '\n';
    }
}

Dataset reorder_dataset(const Dataset& data, const std::vector<std::string>& order) {
    const auto& schema = data.schema();
    if (order.size() != schema.size())
        throw DataError("variable order must name all " + std::to_string(schema.size()) +
                        " columns");
    std::vector<int> perm;
    std::unordered_set<std::string> seen;
    for (const auto& name : order) {
        if (!seen.insert(name).second)
            throw DataError("duplicate variable '" + name + "' in order");
        int idx = -1;
        for (int j = 0; j < static_cast<int>(schema.size()); ++j) {
            if (schema[j].name == name) {
                idx = j;
                break;
            }
        }
        if (idx < 0) throw DataError("no column named '" + name + "'");
        perm.push_back(idx);
    }
    std::vector<Variable> vars;
    for (int j : perm) vars.push_back(schema[j]);
    std::vector<std::vector<int>> rows;
    rows.reserve(data.size());
    for (const auto& row : data.rows()) {
        std::vector<int> out(row.size());
        for (std::size_t j = 0; j < perm.size(); ++j) out[j] = row[perm[j]];
        rows.push_back(std::move(out));
    }
    return Dataset(std::move(vars), std::move(rows));
}

std::string model_to_json(const StagedTreeModel& model) {
    const EventTree& tree = model.tree();
    json j;
    j["variables"] = variables_to_json(tree.variables());
    json staging = json::object();
    json parameters = json::object();
    for (int i = 0; i < tree.num_variables(); ++i) {
        const std::string& name = tree.variable(i).name;
        json var_staging = json::object();
        for (const auto& [rank, stage] : model.staging().contexts(i))
            var_staging[prefix_key(tree, i, rank)] = stage;
        staging[name] = std::move(var_staging);
        json var_params = json::object();
        for (const auto& [stage, theta] : model.parameters()[i]) var_params[stage] = theta;
        parameters[name] = std::move(var_params);
    }
    j["staging"] = std::move(staging);
    j["parameters"] = std::move(parameters);
    j["meta"] = {{"n", model.fit_metadata().n}, {"alpha", model.fit_metadata().alpha}};
    std::vector<std::string> undefined = model.undefined_stage_ids();
    if (!undefined.empty()) j["meta"]["undefined"] = undefined;
    return j.dump(2);
}

StagedTreeModel model_from_json(const std::string& text) try {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid model JSON: ") + e.what());
    }
    const std::vector<Variable> vars = variables_from_json(j.at("variables"));
    EventTree tree = build_event_tree(vars);
    const int p = tree.num_variables();

    std::vector<std::unordered_set<std::uint64_t>> observed(p);
    Staging staging(p);
    bool full = true;
    for (int i = 0; i < p; ++i) {
        const auto& var_staging = j.at("staging").at(vars[i].name);
        for (const auto& [key, stage] : var_staging.items()) {
            const std::uint64_t rank = rank_from_key(tree, i, key);
            observed[i].insert(rank);
            staging.assign(i, rank, stage.get<std::string>());
        }
        if (observed[i].size() != tree.full_context_count(i)) full = false;
    }
    if (!full) {
        // Treat missing contexts as pruned, but reject orphans: a retained
        // context must have a retained parent.
        for (int i = 1; i < p; ++i) {
            const auto arity = static_cast<std::uint64_t>(vars[i - 1].arity());
            for (std::uint64_t rank : observed[i]) {
                if (!observed[i - 1].count(rank / arity))
                    throw DataError("staging entry missing for the parent of context '" +
                                    prefix_key(tree, i, rank) + "' of variable '" +
                                    vars[i].name + "'");
            }
        }
        tree = tree.with_observed(std::move(observed));
    }

    std::vector<StagedTreeModel::ParamMap> params(p);
    for (int i = 0; i < p; ++i) {
        const auto& var_params = j.at("parameters").at(vars[i].name);
        for (const auto& [stage, theta] : var_params.items())
            params[i][stage] = theta.get<std::vector<double>>();
    }

    FitMetadata meta;
    meta.n = j.at("meta").at("n").get<std::uint64_t>();
    meta.alpha = j.at("meta").at("alpha").get<double>();
    meta.undefined_stages.resize(p);
    if (j.at("meta").contains("undefined")) {
        std::unordered_map<std::string, int> stage_var;
        for (int i = 0; i < p; ++i)
            for (const auto& [stage, theta] : params[i]) stage_var[stage] = i;
        for (const auto& s : j.at("meta").at("undefined")) {
            const auto id = s.get<std::string>();
            auto it = stage_var.find(id);
            if (it != stage_var.end()) meta.undefined_stages[it->second].insert(id);
        }
    }

    StagedTreeModel model(std::move(tree), std::move(staging), std::move(params),
                          std::move(meta));
    try {
        model.validate(1e-9);
    } catch (const ModelError& e) {
        throw DataError(std::string("model JSON failed validation: ") + e.what());
    }
    return model;
} catch (const json::exception& e) {
    throw DataError(std::string("invalid model JSON: ") + e.what());
}

void write_model(const std::string& path, const StagedTreeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << model_to_json(model) << '\n';
}

StagedTreeModel read_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

std::vector<Variable> schema_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid schema JSON: ") + e.what());
    }
    try {
        return variables_from_json(j.at("variables"));
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid schema JSON: ") + e.what());
    }
}

std::string export_dot(const StagedTreeModel& model, const DotOptions& options) {
    const EventTree& tree = model.tree();
    const int p = tree.num_variables();
    std::ostringstream out;
    out << "digraph staged_tree {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=circle, style=filled, label=\"\"];\n";

    // Stage colors: per variable, stages in sorted id order cycle the palette.
    std::vector<std::unordered_map<std::string, std::size_t>> color_index(p);
    for (int i = 0; i < p; ++i) {
        std::size_t next = 0;
        for (const auto& [stage, ranks] : model.staging().groups(i))
            color_index[i][stage] = next++;
    }

    char fmt[64];
    for (int i = 0; i < p; ++i) {
        const bool cycled = color_index[i].size() > kPalette.size();
        for (std::uint64_t rank : tree.context_ranks(i)) {
            const std::string& stage = model.staging().stage_of(i, rank);
            const std::size_t ci = color_index[i].at(stage);
            out << "  \"n" << i << "_" << rank << "\" [fillcolor=\""
                << kPalette[ci % kPalette.size()] << "\", tooltip=\"" << dot_escape(stage)
                << "\"";
            if (cycled) out << ", label=\"" << ci << "\"";
            if (options.highlight_positivity && model.stage_undefined(i, stage))
                out << ", color=red, penwidth=2";
            out << "];\n";
        }
    }
    const int last = p - 1;
    for (std::uint64_t rank : tree.context_ranks(last)) {
        for (int k = 0; k < tree.variable(last).arity(); ++k) {
            out << "  \"leaf_" << rank << "_" << k
                << "\" [shape=circle, fillcolor=gray, width=0.15];\n";
        }
    }

    auto edge_label = [&](int var, std::uint64_t rank, int level) {
        std::string label = dot_escape(tree.variable(var).levels.at(level));
        if (options.show_probs) {
            std::snprintf(fmt, sizeof(fmt), " (%.3f)",
                          model.context_distribution(var, rank).at(level));
            label += fmt;
        }
        return label;
    };

    for (int i = 0; i + 1 < p; ++i) {
        const auto arity = static_cast<std::uint64_t>(tree.variable(i).arity());
        for (std::uint64_t child : tree.context_ranks(i + 1)) {
            const std::uint64_t parent = child / arity;
            const int level = static_cast<int>(child % arity);
            out << "  \"n" << i << "_" << parent << "\" -> \"n" << i + 1 << "_" << child
                << "\" [label=\"" << edge_label(i, parent, level) << "\"];\n";
        }
    }
    for (std::uint64_t rank : tree.context_ranks(last)) {
        for (int k = 0; k < tree.variable(last).arity(); ++k) {
            out << "  \"n" << last << "_" << rank << "\" -> \"leaf_" << rank << "_" << k
                << "\" [label=\"" << edge_label(last, rank, k) << "\"];\n";
        }
    }
    out << "}\n";
    return out.str();
}

void write_distribution_csv(std::ostream& out, const DistributionTable& table,
                            const EventTree& tree) {
    for (int v : table.scope) out << csv_escape(tree.variable(v).name) << ',';
    out << "probability\n";
    std::vector<int> codes(table.scope.size(), 0);
    char buf[64];
    for (std::size_t idx = 0; idx < table.probs.size(); ++idx) {
        for (std::size_t j = 0; j < table.scope.size(); ++j)
            out << csv_escape(tree.variable(table.scope[j]).levels.at(codes[j])) << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", table.probs[idx]);
        out << buf << '\n';
        for (int j = static_cast<int>(codes.size()) - 1; j >= 0; --j) {
            if (++codes[j] < tree.variable(table.scope[j]).arity()) break;
            codes[j] = 0;
        }
    }
}

void write_replicates_csv(std::ostream& out, const std::vector<double>& replicates) {
    out << "ate\n";
    char buf[64];
    for (double v : replicates) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << '\n';
    }
}

}  // namespace stagedcausal
