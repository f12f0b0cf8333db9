#include "memqa/edit_memory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace memqa {

using nlohmann::json;

EditIndex EditIndex::build(const EditCollection& edits,
                           std::shared_ptr<const Embedder> embedder,
                           AliasTable aliases) {
  EditIndex index;
  index.embedder_ = std::move(embedder);
  index.aliases_ = std::move(aliases);
  index.entries_ = edits.edits();
  index.vectors_.resize(static_cast<Eigen::Index>(index.entries_.size()),
                        index.embedder_->dimension());
  for (std::size_t i = 0; i < index.entries_.size(); ++i) {
    try {
      index.vectors_.row(static_cast<Eigen::Index>(i)) =
          index.embedder_->embed(index.entries_[i].edited_text()).transpose();
    } catch (const TransportError& e) {
      throw TransportError("index build aborted at edit " +
                           index.entries_[i].edit_id + ": " + e.what());
    }
  }
  return index;
}

std::vector<ScoredCandidate> EditIndex::retrieve_top_k(const SubProblem& query,
                                                       int k) const {
  if (!query.subject.has_value()) {
    throw ValidationError("retrieval query must have a bound subject");
  }
  if (k < 1) {
    throw ValidationError("retrieval k must be >= 1");
  }
  if (entries_.empty()) return {};

  const EmbeddingVector q = embedder_->embed(subproblem_to_text(query));
  const Eigen::VectorXd scores = vectors_ * q;

  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)];
    const double sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return entries_[a].edit_id < entries_[b].edit_id;
  });

  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::vector<ScoredCandidate> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    out.push_back(ScoredCandidate{entries_[order[r]],
                                  scores[static_cast<Eigen::Index>(order[r])],
                                  static_cast<int>(r) + 1});
  }
  return out;
}

namespace {

json edit_to_json(const FactEdit& e) {
  json j{{"edit_id", e.edit_id},
         {"subject", e.subject},
         {"relation", e.relation},
         {"new_object", e.new_object}};
  j["old_object"] = e.old_object ? json(*e.old_object) : json(nullptr);
  return j;
}

FactEdit edit_from_json(const json& j) {
  std::optional<std::string> old_object;
  if (j.contains("old_object") && !j.at("old_object").is_null()) {
    old_object = j.at("old_object").get<std::string>();
  }
  return FactEdit(j.at("edit_id").get<std::string>(),
                  j.at("subject").get<std::string>(),
                  j.at("relation").get<std::string>(), std::move(old_object),
                  j.at("new_object").get<std::string>());
}

json aliases_to_json(const AliasTable& aliases) {
  json out = json::object();
  for (const auto& [canonical, surfaces] : aliases.groups()) {
    out[canonical] = surfaces;
  }
  return out;
}

AliasTable aliases_from_json(const json& j) {
  AliasTable table;
  for (auto it = j.begin(); it != j.end(); ++it) {
    table.add_group(it.key(), it.value().get<std::vector<std::string>>());
  }
  return table;
}

}  // namespace

void EditIndex::save(const std::filesystem::path& path) const {
  json entries = json::array();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    json entry = edit_to_json(entries_[i]);
    std::vector<double> values(
        vectors_.row(static_cast<Eigen::Index>(i)).begin(),
        vectors_.row(static_cast<Eigen::Index>(i)).end());
    entry["vector"] = values;
    entries.push_back(std::move(entry));
  }
  const json doc{{"format", "memqa-edit-index"},
                 {"version", 1},
                 {"embedder",
                  {{"fingerprint", embedder_->fingerprint()},
                   {"dimension", embedder_->dimension()}}},
                 {"aliases", aliases_to_json(aliases_)},
                 {"entries", entries}};
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cannot write index file: " + path.string());
  }
  out << doc.dump(2) << "\n";
}

EditIndex EditIndex::load(const std::filesystem::path& path,
                          std::shared_ptr<const Embedder> embedder) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("index not found: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("malformed index file " + path.string() + ": " +
                     e.what());
  }
  if (doc.value("format", "") != "memqa-edit-index") {
    throw ParseError("not an edit index file: " + path.string());
  }
  const std::string fingerprint =
      doc.at("embedder").at("fingerprint").get<std::string>();
  if (fingerprint != embedder->fingerprint()) {
    throw ValidationError("index was built with embedder '" + fingerprint +
                          "' but loaded with '" + embedder->fingerprint() +
                          "'");
  }
  EditIndex index;
  index.embedder_ = std::move(embedder);
  index.aliases_ = aliases_from_json(doc.value("aliases", json::object()));
  const auto& entries = doc.at("entries");
  index.vectors_.resize(static_cast<Eigen::Index>(entries.size()),
                        index.embedder_->dimension());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& entry = entries.at(i);
    index.entries_.push_back(edit_from_json(entry));
    const auto& values = entry.at("vector");
    if (static_cast<int>(values.size()) != index.embedder_->dimension()) {
      throw ParseError("index entry " + std::to_string(i) +
                       " has wrong vector dimension");
    }
    for (int d = 0; d < index.embedder_->dimension(); ++d) {
      index.vectors_(static_cast<Eigen::Index>(i), d) =
          values.at(d).get<double>();
    }
  }
  return index;
}

EditCollection load_edits_jsonl(const std::filesystem::path& path,
                                const AliasTable& aliases) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("edits file not found: " + path.string());
  }
  EditCollection collection;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      collection.ingest(edit_from_json(json::parse(line)), aliases);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_number) + ": " +
                       e.what());
    } catch (const ValidationError& e) {
      throw ParseError("line " + std::to_string(line_number) + ": " +
                       e.what());
    }
  }
  return collection;
}

AliasTable load_alias_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("alias file not found: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("malformed alias file " + path.string() + ": " +
                     e.what());
  }
  return aliases_from_json(doc);
}

}  // namespace memqa
