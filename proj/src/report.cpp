#include "hte/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hte/common.hpp"
#include "hte/csv.hpp"

namespace hte {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
using nlohmann::json;
}  // namespace

void HistogramSpec::validate() const {
  if (bin_width < 0.0 || (bin_width == 0.0 && bins < 1)) {
    throw ConfigError("histogram: need at least one bin");
  }
}

std::string histogram_csv(const CateEstimates& cate, const AteEstimate& ate,
                          const HistogramSpec& spec) {
  spec.validate();
  std::vector<double> values;
  values.reserve(cate.tau_hat.size());
  for (double v : cate.tau_hat) {
    if (!is_missing(v)) {
      values.push_back(v);
    }
  }
  if (values.empty()) {
    throw DataError("histogram: no finite estimates");
  }
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());

  double width;
  std::size_t n_bins;
  if (hi == lo) {
    // Degenerate distribution: one bin centered on the point mass.
    width = spec.bin_width > 0.0 ? spec.bin_width : 0.01 * std::max(1.0, std::abs(lo));
    lo -= width / 2.0;
    n_bins = 1;
  } else if (spec.bin_width > 0.0) {
    width = spec.bin_width;
    lo = std::floor(lo / width) * width;
    n_bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    if (lo + static_cast<double>(n_bins) * width <= hi) {
      ++n_bins;
    }
  } else {
    n_bins = static_cast<std::size_t>(spec.bins);
    width = (hi - lo) / static_cast<double>(n_bins);
  }

  std::vector<std::size_t> counts(n_bins, 0);
  for (double v : values) {
    std::size_t bin =
        width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
    if (bin >= n_bins) {
      bin = n_bins - 1;  // right edge lands in the last bin
    }
    ++counts[bin];
  }

  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < n_bins; ++b) {
    out << format_double(lo + static_cast<double>(b) * width) << ','
        << format_double(lo + static_cast<double>(b + 1) * width) << ',' << counts[b] << '\n';
  }
  out << "# ate," << format_double(ate.estimate) << '\n';
  out << "# se," << format_double(ate.se) << '\n';
  out << "# ci_lo," << format_double(ate.estimate - 1.96 * ate.se) << '\n';
  out << "# ci_hi," << format_double(ate.estimate + 1.96 * ate.se) << '\n';
  out << "# zero,0\n";
  out << "# n," << values.size() << '\n';
  return out.str();
}

std::string ate_table_csv(const std::vector<std::pair<std::string, AteEstimate>>& rows) {
  std::ostringstream out;
  out << "contrast,estimate,se,n\n";
  for (const auto& [name, ate] : rows) {
    out << csv::escape(name) << ',' << format_double(ate.estimate) << ',' << format_double(ate.se)
        << ',' << ate.n << '\n';
  }
  return out.str();
}

namespace {

void nodes_in_id_order(const DdrctNode& root, std::vector<const DdrctNode*>& out) {
  out.push_back(&root);
  for (std::size_t q = 0; q < out.size(); ++q) {
    const DdrctNode* node = out[q];
    if (!node->is_leaf()) {
      out.push_back(node->left.get());
      out.push_back(node->right.get());
    }
  }
  std::sort(out.begin(), out.end(),
            [](const DdrctNode* a, const DdrctNode* b) { return a->id < b->id; });
}

std::string maybe(double v) { return is_missing(v) ? "" : format_double(v); }

}  // namespace

std::string nodes_table_csv(const DdrctTree& tree) {
  std::vector<const DdrctNode*> nodes;
  nodes_in_id_order(tree.root, nodes);
  std::ostringstream out;
  out << "node,depth,est,se,ci_lo,ci_hi,n,significant,rules\n";
  for (const DdrctNode* node : nodes) {
    std::string rules;
    for (std::size_t i = 0; i < node->rule_path.size(); ++i) {
      if (i > 0) {
        rules += " AND ";
      }
      rules += node->rule_path[i];
    }
    out << node->id << ',' << node->depth << ',' << maybe(node->estimate) << ','
        << maybe(node->se) << ',' << maybe(node->ci_lo) << ',' << maybe(node->ci_hi) << ','
        << node->n << ',' << (node->significant ? 1 : 0) << ',' << csv::escape(rules) << '\n';
  }
  return out.str();
}

namespace {

std::string label_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", value);
  return buf;
}

}  // namespace

std::string tree_dot(const DdrctTree& tree) {
  std::vector<const DdrctNode*> nodes;
  nodes_in_id_order(tree.root, nodes);
  std::ostringstream out;
  out << "digraph ddrct {\n";
  out << "  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const DdrctNode* node : nodes) {
    out << "  n" << node->id << " [label=\"";
    if (node->flagged_empty) {
      out << "no estimation units";
    } else {
      out << "est " << label_number(node->estimate);
      if (!is_missing(node->se)) {
        out << " (se " << label_number(node->se) << ")";
      }
      out << "\\nn = " << node->n;
      if (node->significant) {
        out << " *";
      }
    }
    out << "\"];\n";
  }
  for (const DdrctNode* node : nodes) {
    if (node->is_leaf()) {
      continue;
    }
    out << "  n" << node->id << " -> n" << node->left->id << " [label=\""
        << node->left->rule_path.back() << "\"];\n";
    out << "  n" << node->id << " -> n" << node->right->id << " [label=\""
        << node->right->rule_path.back() << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

namespace {

json number_or_null(double v) {
  if (is_missing(v)) {
    return nullptr;
  }
  return v;
}

double number_from(const json& j) {
  if (j.is_null()) {
    return kNaN;
  }
  return j.get<double>();
}

json node_to_json(const DdrctNode& node) {
  json j;
  j["id"] = node.id;
  j["depth"] = node.depth;
  j["estimate"] = number_or_null(node.estimate);
  j["se"] = number_or_null(node.se);
  j["ci_lo"] = number_or_null(node.ci_lo);
  j["ci_hi"] = number_or_null(node.ci_hi);
  j["n"] = node.n;
  j["significant"] = node.significant;
  j["flagged_empty"] = node.flagged_empty;
  j["bootstrap_skipped"] = node.bootstrap_skipped;
  j["rule_path"] = node.rule_path;
  if (!node.is_leaf()) {
    j["split"] = {{"var", node.split_var},
                  {"threshold", node.threshold},
                  {"missing", node.missing_left ? "left" : "right"}};
    j["left"] = node_to_json(*node.left);
    j["right"] = node_to_json(*node.right);
  }
  return j;
}

DdrctNode node_from_json(const json& j) {
  DdrctNode node;
  node.id = j.at("id").get<int>();
  node.depth = j.at("depth").get<int>();
  node.estimate = number_from(j.at("estimate"));
  node.se = number_from(j.at("se"));
  node.ci_lo = number_from(j.at("ci_lo"));
  node.ci_hi = number_from(j.at("ci_hi"));
  node.n = j.at("n").get<std::size_t>();
  node.significant = j.at("significant").get<bool>();
  node.flagged_empty = j.at("flagged_empty").get<bool>();
  node.bootstrap_skipped = j.at("bootstrap_skipped").get<int>();
  node.rule_path = j.at("rule_path").get<std::vector<std::string>>();
  if (j.contains("split")) {
    const json& split = j.at("split");
    node.split_var = split.at("var").get<int>();
    node.threshold = split.at("threshold").get<double>();
    node.missing_left = split.at("missing").get<std::string>() == "left";
    node.left = std::make_unique<DdrctNode>(node_from_json(j.at("left")));
    node.right = std::make_unique<DdrctNode>(node_from_json(j.at("right")));
  }
  return node;
}

}  // namespace

std::string tree_to_json(const DdrctTree& tree, std::span<const std::string> column_names,
                         const AteEstimate* ate) {
  json j;
  j["format"] = "ddrct-tree/1";
  j["contrast"] = {{"target", tree.contrast.target}, {"baseline", tree.contrast.baseline}};
  j["params"] = {{"max_depth", tree.params.max_depth},
                 {"n_candidates", tree.params.n_candidates},
                 {"candidate_subsample", tree.params.candidate_subsample},
                 {"n_bootstrap", tree.params.n_bootstrap},
                 {"min_leaf", tree.params.min_leaf},
                 {"seed", tree.params.seed},
                 {"alpha", tree.params.alpha}};
  if (ate != nullptr) {
    j["ate"] = {{"estimate", ate->estimate}, {"se", ate->se}, {"n", ate->n}};
  }
  j["column_names"] = std::vector<std::string>(column_names.begin(), column_names.end());
  j["fit_half"] = tree.fit_half;
  j["estimate_half"] = tree.estimate_half;
  j["chosen_candidate"] = tree.chosen_candidate;
  json losses = json::array();
  for (double loss : tree.candidate_losses) {
    losses.push_back(number_or_null(std::isinf(loss) ? kNaN : loss));
  }
  j["candidate_losses"] = std::move(losses);
  j["root"] = node_to_json(tree.root);
  return j.dump(2) + "\n";
}

LoadedTree tree_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("tree json: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ddrct-tree/1") {
      throw DataError("tree json: unknown format tag");
    }
    LoadedTree loaded;
    DdrctTree& tree = loaded.tree;
    tree.contrast.target = j.at("contrast").at("target").get<int>();
    tree.contrast.baseline = j.at("contrast").at("baseline").get<int>();
    const json& params = j.at("params");
    tree.params.max_depth = params.at("max_depth").get<int>();
    tree.params.n_candidates = params.at("n_candidates").get<int>();
    tree.params.candidate_subsample = params.at("candidate_subsample").get<double>();
    tree.params.n_bootstrap = params.at("n_bootstrap").get<int>();
    tree.params.min_leaf = params.at("min_leaf").get<int>();
    tree.params.seed = params.at("seed").get<uint64_t>();
    tree.params.alpha = params.at("alpha").get<double>();
    loaded.column_names = j.at("column_names").get<std::vector<std::string>>();
    tree.fit_half = j.at("fit_half").get<std::vector<uint32_t>>();
    tree.estimate_half = j.at("estimate_half").get<std::vector<uint32_t>>();
    tree.chosen_candidate = j.at("chosen_candidate").get<int>();
    for (const json& loss : j.at("candidate_losses")) {
      tree.candidate_losses.push_back(loss.is_null()
                                          ? std::numeric_limits<double>::infinity()
                                          : loss.get<double>());
    }
    tree.root = node_from_json(j.at("root"));
    if (j.contains("ate")) {
      loaded.has_ate = true;
      loaded.ate.contrast = tree.contrast;
      loaded.ate.estimate = j.at("ate").at("estimate").get<double>();
      loaded.ate.se = j.at("ate").at("se").get<double>();
      loaded.ate.n = j.at("ate").at("n").get<std::size_t>();
    }
    return loaded;
  } catch (const json::exception& e) {
    throw DataError(std::string("tree json: ") + e.what());
  }
}

}  // namespace hte
