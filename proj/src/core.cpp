#include "memqa/core.hpp"

#include <unicode/errorcode.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cctype>

namespace memqa {

namespace {

constexpr std::string_view kSeparator = "; ";

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Trim + collapse internal whitespace runs to a single replacement char.
std::string squeeze_whitespace(std::string_view raw, char replacement) {
  std::string out;
  out.reserve(raw.size());
  bool pending_gap = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_gap = !out.empty();
      continue;
    }
    if (pending_gap) {
      out.push_back(replacement);
      pending_gap = false;
    }
    out.push_back(c);
  }
  return out;
}

std::string nfc(const std::string& utf8) {
  icu::ErrorCode status;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (status.isFailure()) {
    throw ValidationError("NFC normalizer unavailable");
  }
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(utf8);
  icu::UnicodeString normalized = norm->normalize(in, status);
  if (status.isFailure()) {
    throw ValidationError("NFC normalization failed");
  }
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string ascii_lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

void reject_separator(const std::string& field, std::string_view what) {
  if (field.find(kSeparator) != std::string::npos) {
    throw ValidationError(std::string(what) +
                          " may not contain the \"; \" separator: " + field);
  }
}

}  // namespace

std::string normalize_entity(std::string_view raw) {
  std::string squeezed = squeeze_whitespace(raw, ' ');
  if (squeezed.empty()) {
    throw ValidationError("entity is empty after whitespace trimming");
  }
  return nfc(squeezed);
}

std::string normalize_relation(std::string_view raw) {
  std::string squeezed = squeeze_whitespace(raw, '_');
  if (squeezed.empty()) {
    throw ValidationError("relation is empty after whitespace trimming");
  }
  return nfc(ascii_lower(std::move(squeezed)));
}

std::string fold_key(std::string_view entity) {
  return ascii_lower(normalize_entity(entity));
}

Triplet::Triplet(std::string_view subject_raw, std::string_view relation_raw,
                 std::string_view object_raw)
    : subject(normalize_entity(subject_raw)),
      relation(normalize_relation(relation_raw)),
      object(normalize_entity(object_raw)) {
  reject_separator(subject, "triplet subject");
  reject_separator(relation, "triplet relation");
  reject_separator(object, "triplet object");
}

std::string triplet_to_text(const Triplet& t) {
  std::string out;
  out.reserve(t.subject.size() + t.relation.size() + t.object.size() + 4);
  out.append(t.subject).append(kSeparator);
  out.append(t.relation).append(kSeparator);
  out.append(t.object);
  return out;
}

Triplet parse_triplet_text(std::string_view text) {
  const std::size_t first = text.find(kSeparator);
  if (first == std::string_view::npos) {
    throw ParseError("triplet text has no \"; \" separator: " +
                     std::string(text));
  }
  const std::size_t second = text.find(kSeparator, first + kSeparator.size());
  if (second == std::string_view::npos ||
      text.find(kSeparator, second + kSeparator.size()) !=
          std::string_view::npos) {
    throw ParseError("triplet text must have exactly three fields: " +
                     std::string(text));
  }
  return Triplet(text.substr(0, first),
                 text.substr(first + kSeparator.size(),
                             second - first - kSeparator.size()),
                 text.substr(second + kSeparator.size()));
}

FactEdit::FactEdit(std::string_view id, std::string_view subject_raw,
                   std::string_view relation_raw,
                   std::optional<std::string> old_object_raw,
                   std::string_view new_object_raw)
    : edit_id(squeeze_whitespace(id, ' ')),
      subject(normalize_entity(subject_raw)),
      relation(normalize_relation(relation_raw)),
      new_object(normalize_entity(new_object_raw)) {
  if (edit_id.empty()) {
    throw ValidationError("edit_id must be non-empty");
  }
  reject_separator(subject, "edit subject");
  reject_separator(relation, "edit relation");
  reject_separator(new_object, "edit new_object");
  if (old_object_raw) {
    old_object = normalize_entity(*old_object_raw);
    reject_separator(*old_object, "edit old_object");
    if (*old_object == new_object) {
      throw ValidationError("edit " + edit_id +
                            ": old_object equals new_object");
    }
  }
}

std::string FactEdit::edited_text() const {
  return triplet_to_text(Triplet(subject, relation, new_object));
}

void AliasTable::add_group(std::string_view canonical,
                           const std::vector<std::string>& aliases) {
  std::string canon = normalize_entity(canonical);
  std::vector<std::string> surfaces;
  std::set<std::string> keys{fold_key(canon)};
  for (const auto& a : aliases) {
    std::string norm = normalize_entity(a);
    keys.insert(fold_key(norm));
    if (norm != canon &&
        std::find(surfaces.begin(), surfaces.end(), norm) == surfaces.end()) {
      surfaces.push_back(std::move(norm));
    }
  }
  const std::size_t ordinal = groups_.size();
  for (const auto& k : keys) {
    membership_[k].push_back(ordinal);
  }
  groups_.emplace_back(std::move(canon), std::move(surfaces));
  group_keys_.push_back(std::move(keys));
}

bool AliasTable::match(std::string_view a, std::string_view b) const {
  const std::string ka = fold_key(a);
  const std::string kb = fold_key(b);
  if (ka == kb) return true;
  auto ita = membership_.find(ka);
  auto itb = membership_.find(kb);
  if (ita == membership_.end() || itb == membership_.end()) return false;
  for (std::size_t ga : ita->second) {
    for (std::size_t gb : itb->second) {
      if (ga == gb) return true;
    }
  }
  return false;
}

std::set<std::string> AliasTable::lookup(std::string_view x) const {
  std::string norm = normalize_entity(x);
  std::set<std::string> out;
  out.insert(norm);
  auto it = membership_.find(fold_key(norm));
  if (it != membership_.end()) {
    for (std::size_t g : it->second) {
      out.insert(groups_[g].first);
      out.insert(groups_[g].second.begin(), groups_[g].second.end());
    }
  }
  return out;
}

std::string AliasTable::group_key(std::string_view x) const {
  const std::string k = fold_key(x);
  auto it = membership_.find(k);
  if (it == membership_.end() || it->second.empty()) return k;
  // First group wins so the representative is stable across queries.
  return *group_keys_[it->second.front()].begin();
}

void EditCollection::ingest(FactEdit edit, const AliasTable& aliases) {
  const std::string key = aliases.group_key(edit.subject) + "\x1f" +
                          edit.relation;
  auto duplicate =
      std::find_if(edits_.begin(), edits_.end(), [&](const FactEdit& e) {
        return aliases.group_key(e.subject) + "\x1f" + e.relation == key;
      });
  if (duplicate != edits_.end()) {
    edits_.erase(duplicate);
  }
  for (const auto& e : edits_) {
    if (e.edit_id == edit.edit_id) {
      throw ValidationError("duplicate edit_id in collection: " + e.edit_id);
    }
  }
  edits_.push_back(std::move(edit));
}

std::string subproblem_to_text(const SubProblem& p) {
  std::string out = p.subject ? *p.subject : "?";
  out.append("; ").append(p.relation).append("; ");
  out.append(p.object ? *p.object : "?");
  return out;
}

void ReasoningPath::validate() const {
  if (start_entity.empty()) {
    throw ValidationError("reasoning path start entity is empty");
  }
  if (steps.empty()) {
    throw ValidationError("reasoning path has no steps");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].hop_index != static_cast<int>(i) + 1) {
      throw ValidationError("hop indices must be contiguous from 1");
    }
    if (i > 0 && steps[i].subject.has_value()) {
      throw ValidationError(
          "only the first hop may have a bound subject at decomposition");
    }
    if (steps[i].object.has_value()) {
      throw ValidationError("object slots are unbound at decomposition");
    }
  }
}

void MultiHopInstance::validate() const {
  if (instance_id.empty()) {
    throw ValidationError("instance_id must be non-empty");
  }
  if (questions.empty()) {
    throw ValidationError("instance " + instance_id + ": no questions");
  }
  if (edits.empty()) {
    throw ValidationError("instance " + instance_id + ": no edits");
  }
  if (original_path.empty() || original_path.size() != edited_path.size()) {
    throw ValidationError("instance " + instance_id +
                          ": original_path and edited_path must have equal "
                          "non-zero length");
  }
  if (fold_key(edited_answer) != fold_key(edited_path.back().object)) {
    throw ValidationError("instance " + instance_id +
                          ": edited_answer must equal the object of the last "
                          "edited_path triplet");
  }
  bool found = false;
  for (const auto& a : answer_aliases) {
    if (fold_key(a) == fold_key(edited_answer)) found = true;
  }
  if (!found) {
    throw ValidationError("instance " + instance_id +
                          ": answer_aliases must contain edited_answer");
  }
}

std::string_view to_string(HopSource s) {
  switch (s) {
    case HopSource::memory_implication:
      return "memory_implication";
    case HopSource::memory_composition:
      return "memory_composition";
    case HopSource::memory_similarity:
      return "memory_similarity";
    case HopSource::llm_fallback:
      return "llm_fallback";
  }
  return "llm_fallback";
}

}  // namespace memqa
