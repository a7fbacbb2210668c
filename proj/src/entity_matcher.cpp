#include "kgqa/entity_matcher.hpp"

#include <algorithm>
#include <cctype>

#include "kgqa/error.hpp"
#include "tsv.hpp"

namespace kgqa {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }
char lower(unsigned char c) { return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c); }

std::string join(const std::vector<NormalizedToken>& tokens, size_t begin, size_t count) {
  std::string out;
  for (size_t i = begin; i < begin + count; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i].text;
  }
  return out;
}

}  // namespace

std::vector<NormalizedToken> normalize_tokens(std::string_view text) {
  std::vector<NormalizedToken> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    size_t b = i, e = j;
    while (b < e && is_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      NormalizedToken tok{std::string(), CharSpan{b, e}};
      tok.text.reserve(e - b);
      for (size_t k = b; k < e; ++k) tok.text.push_back(lower(static_cast<unsigned char>(text[k])));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::string normalize(std::string_view text) {
  const auto tokens = normalize_tokens(text);
  return join(tokens, 0, tokens.size());
}

Gazetteer Gazetteer::build(const KnowledgeGraph& kg) {
  Gazetteer gz;
  gz.names_.resize(kg.num_entities());
  gz.kinds_.resize(kg.num_entities());
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    const auto& m = kg.meta(e);
    gz.names_[e] = m.name;
    gz.kinds_[e] = m.kind;
    if (normalize(m.name).empty()) {
      ++gz.skipped_unnamed_;
      continue;
    }
    gz.add_form(m.name, e);
    for (const auto& syn : m.synonyms) gz.add_form(syn, e);
  }
  return gz;
}

void Gazetteer::add_form(std::string_view surface, EntityId entity) {
  const auto tokens = normalize_tokens(surface);
  if (tokens.empty()) return;
  if (entity >= names_.size()) {
    names_.resize(entity + 1);
    kinds_.resize(entity + 1);
  }
  if (names_[entity].empty()) names_[entity] = std::string(surface);
  uint32_t node = 0;
  for (const auto& t : tokens) {
    auto it = nodes_[node].children.find(t.text);
    if (it == nodes_[node].children.end()) {
      const auto next = static_cast<uint32_t>(nodes_.size());
      nodes_[node].children.emplace(t.text, next);
      nodes_.emplace_back();
      node = next;
    } else {
      node = it->second;
    }
  }
  auto& ents = nodes_[node].entities;
  const auto pos = std::lower_bound(ents.begin(), ents.end(), entity);
  if (pos != ents.end() && *pos == entity) return;
  ents.insert(pos, entity);
  std::pair<std::string, EntityId> form{join(tokens, 0, tokens.size()), entity};
  forms_.insert(std::lower_bound(forms_.begin(), forms_.end(), form), std::move(form));
}

size_t Gazetteer::add_synonyms_tsv(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::string raw;
  size_t line_no = 0;
  size_t unknown = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split_on(line, '\t');
    if (f.size() != 2) throw ParseError(detail::where(path, line_no) + ": expected entity-id<TAB>synonym");
    const auto e = kg.entities().find(f[0]);
    if (!e) {
      ++unknown;
      continue;
    }
    add_form(f[1], *e);
  }
  return unknown;
}

std::vector<EntityId> Gazetteer::lookup(std::string_view surface) const {
  uint32_t node = 0;
  for (const auto& t : normalize_tokens(surface)) {
    auto it = nodes_[node].children.find(t.text);
    if (it == nodes_[node].children.end()) return {};
    node = it->second;
  }
  return node == 0 ? std::vector<EntityId>{} : nodes_[node].entities;
}

std::vector<HeadMatch> Gazetteer::matches(std::string_view question) const {
  const auto tokens = normalize_tokens(question);
  std::vector<HeadMatch> out;
  for (size_t start = 0; start < tokens.size(); ++start) {
    uint32_t node = 0;
    size_t best_len = 0;
    uint32_t best_node = 0;
    for (size_t i = start; i < tokens.size(); ++i) {
      auto it = nodes_[node].children.find(tokens[i].text);
      if (it == nodes_[node].children.end()) break;
      node = it->second;
      if (!nodes_[node].entities.empty()) {
        best_len = i - start + 1;
        best_node = node;
      }
    }
    if (best_len == 0) continue;
    HeadMatch m;
    m.candidates = nodes_[best_node].entities;
    m.token_begin = start;
    m.token_count = best_len;
    m.span = CharSpan{tokens[start].span.begin, tokens[start + best_len - 1].span.end};
    m.surface = join(tokens, start, best_len);
    out.push_back(std::move(m));
  }
  return out;
}

std::optional<HeadMatch> Gazetteer::longest_match(std::string_view question) const {
  auto all = matches(question);
  std::optional<HeadMatch> best;
  for (auto& m : all) {
    if (!best || m.token_count > best->token_count) best = std::move(m);
  }
  return best;
}

std::vector<EntitySuggestion> Gazetteer::complete(std::string_view prefix, size_t limit) const {
  const std::string key = normalize(prefix);
  std::vector<char> seen(names_.size(), 0);
  std::vector<EntitySuggestion> out;
  for (auto it = std::lower_bound(forms_.begin(), forms_.end(), std::make_pair(key, EntityId{0}));
       it != forms_.end() && it->first.compare(0, key.size(), key) == 0; ++it) {
    if (seen[it->second]) continue;
    seen[it->second] = 1;
    out.push_back(EntitySuggestion{it->second, names_[it->second], kinds_[it->second]});
  }
  std::vector<std::pair<std::string, size_t>> keys;
  keys.reserve(out.size());
  for (size_t i = 0; i < out.size(); ++i) keys.emplace_back(normalize(out[i].name), i);
  std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return out[a.second].entity < out[b.second].entity;
  });
  std::vector<EntitySuggestion> sorted;
  for (size_t i = 0; i < std::min(limit, keys.size()); ++i) sorted.push_back(out[keys[i].second]);
  return sorted;
}

const std::string& Gazetteer::display_name(EntityId e) const {
  if (e >= names_.size()) throw IndexError("entity index " + std::to_string(e) + " not in gazetteer");
  return names_[e];
}

HeadMatch extract_head(std::string_view question, const Gazetteer& gazetteer) {
  auto m = gazetteer.longest_match(question);
  if (!m) throw NoEntityFoundError(std::string(question), normalize(question));
  return std::move(*m);
}

}  // namespace kgqa
