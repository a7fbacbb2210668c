#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgqa/kg_store.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

struct NormalizedToken {
  std::string text;
  CharSpan span;
};

// Lowercases, splits on whitespace, strips leading/trailing punctuation from
// each token and drops tokens that become empty. Interior punctuation
// (hyphens, parentheses) is kept.
std::vector<NormalizedToken> normalize_tokens(std::string_view text);
std::string normalize(std::string_view text);

struct HeadMatch {
  std::vector<EntityId> candidates;  // sorted; more than one means ambiguous
  CharSpan span;
  size_t token_begin = 0;
  size_t token_count = 0;
  std::string surface;  // normalized matched form

  bool ambiguous() const { return candidates.size() > 1; }
  EntityId entity() const { return candidates.front(); }
};

struct EntitySuggestion {
  EntityId entity = 0;
  std::string name;
  std::string kind;
};

// Token trie over normalized surface forms of entity names and synonyms.
class Gazetteer {
 public:
  static Gazetteer build(const KnowledgeGraph& kg);

  // Adds one surface form; no-op if it normalizes to nothing.
  void add_form(std::string_view surface, EntityId entity);
  // `entity-id<TAB>synonym` rows; unknown ids are skipped and counted.
  size_t add_synonyms_tsv(const KnowledgeGraph& kg, const std::filesystem::path& path);

  size_t num_forms() const { return forms_.size(); }
  size_t skipped_unnamed() const { return skipped_unnamed_; }
  bool empty() const { return forms_.empty(); }

  std::vector<EntityId> lookup(std::string_view surface) const;

  // Every (start, longest-at-start) match in the question, left to right.
  std::vector<HeadMatch> matches(std::string_view question) const;
  // Longest match overall, leftmost on ties.
  std::optional<HeadMatch> longest_match(std::string_view question) const;

  // Case-insensitive prefix completion over names and synonyms, one entry
  // per entity, sorted by display name. An empty prefix lists everything.
  std::vector<EntitySuggestion> complete(std::string_view prefix, size_t limit) const;

  const std::string& display_name(EntityId e) const;

 private:
  struct Node {
    std::unordered_map<std::string, uint32_t> children;
    std::vector<EntityId> entities;
  };

  std::vector<Node> nodes_{Node{}};
  // (normalized form, entity), kept sorted for prefix queries.
  std::vector<std::pair<std::string, EntityId>> forms_;
  std::vector<std::string> names_;
  std::vector<std::string> kinds_;
  size_t skipped_unnamed_ = 0;
};

// Throws NoEntityFoundError when nothing matches. An ambiguous winning form
// is returned with all of its candidates.
HeadMatch extract_head(std::string_view question, const Gazetteer& gazetteer);

}  // namespace kgqa
