/*
 * Copyright 2026 The byovla Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "byovla/regions.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

namespace byovla {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ';')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_quoted(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += (i ? ", \"" : "\"") + items[i] + "\"";
  }
  return out + "]";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

void validate_label(const std::string& label, const std::string& raw) {
  if (trim(label).empty()) throw ProposalParseError("empty region label", raw);
  std::stringstream in(label);
  std::string word;
  int words = 0;
  while (in >> word) ++words;
  if (words > 4) {
    throw ProposalParseError("region label '" + label + "' exceeds four words", raw);
  }
}

std::vector<std::string> quoted_items(const std::string& body, const std::string& raw) {
  static const std::regex item(R"re("([^"]*)"|'([^']*)')re");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), item);
       it != std::sregex_iterator(); ++it) {
    std::string v = (*it)[1].matched ? (*it)[1].str() : (*it)[2].str();
    v = trim(v);
    validate_label(v, raw);
    out.push_back(v);
  }
  // Anything besides quotes, commas and whitespace means this is not a list.
  std::string rest = std::regex_replace(body, item, "");
  if (rest.find_first_not_of(" ,\t\r\n") != std::string::npos) {
    throw ProposalParseError("bracketed list holds unquoted text", raw);
  }
  return out;
}

// Finds "[...]" starting at or after `from`; returns false if none.
bool next_list(const std::string& text, std::size_t from, std::size_t& open,
               std::size_t& close) {
  open = text.find('[', from);
  if (open == std::string::npos) return false;
  close = text.find(']', open);
  return close != std::string::npos;
}

}  // namespace

nlohmann::json to_json(const RegionProposal& p) {
  return {{"not_relevant_objects", p.not_relevant_objects},
          {"not_relevant_backgrounds", p.not_relevant_backgrounds}};
}

PromptTemplate parse_prompt_template(const std::string& text) {
  PromptTemplate tmpl;
  std::stringstream in(text);
  std::string line;
  std::string section;
  std::string preamble, query;
  bool header = false;
  while (std::getline(in, line)) {
    if (!header) {
      std::stringstream h(line);
      std::string magic, kind;
      h >> magic >> kind >> tmpl.id >> tmpl.version;
      if (magic != "#!" || kind != "prompt-template" || tmpl.id.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "prompt template lacks a header line");
      }
      header = true;
      continue;
    }
    const std::string t = trim(line);
    if (t == "[preamble]" || t == "[query]" || t == "[exemplar]") {
      section = t;
      if (t == "[exemplar]") tmpl.exemplars.emplace_back();
      continue;
    }
    if (section == "[preamble]") {
      preamble += line + "\n";
    } else if (section == "[query]") {
      query += line + "\n";
    } else if (section == "[exemplar]") {
      if (t.empty()) continue;
      const auto colon = t.find(':');
      if (colon == std::string::npos) {
        throw Error(ErrorCode::kInvalidArgument, "bad exemplar line: " + t);
      }
      const std::string key = trim(t.substr(0, colon));
      const std::string value = trim(t.substr(colon + 1));
      auto& ex = tmpl.exemplars.back();
      if (key == "image") ex.image_ref = value;
      else if (key == "task") ex.task = value;
      else if (key == "objects") ex.objects = split_list(value);
      else if (key == "backgrounds") ex.backgrounds = split_list(value);
      else throw Error(ErrorCode::kInvalidArgument, "unknown exemplar key: " + key);
    } else if (!t.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "text outside any section: " + t);
    }
  }
  tmpl.preamble = trim(preamble);
  tmpl.query = trim(query);
  if (tmpl.query.find("{TASK}") == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "prompt query lacks {TASK}");
  }
  if (tmpl.exemplars.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "prompt template needs >= 1 exemplar");
  }
  return tmpl;
}

const PromptTemplate& default_prompt_template() {
  static const PromptTemplate tmpl = parse_prompt_template(
#include "default_prompt.inc"
  );
  return tmpl;
}

PromptTemplate load_prompt_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_prompt_template(buf.str());
}

std::string render_prompt(const PromptTemplate& tmpl, const std::string& task,
                          const std::vector<std::string>& image_refs) {
  std::string out = tmpl.preamble + "\n\n";
  for (std::size_t i = 0; i < tmpl.exemplars.size(); ++i) {
    const auto& ex = tmpl.exemplars[i];
    out += "Example " + std::to_string(i + 1) + ". Task: '" + ex.task + "'\n\n";
    out += join_quoted(ex.objects) + "\n" + join_quoted(ex.backgrounds) + "\n\n";
    out += ex.image_ref + "\n\n";
  }
  out += tmpl.query + "\n";
  replace_all(out, "{TASK}", task);
  // Largest index first so {IMAGE_1} does not clobber {IMAGE_10}.
  for (std::size_t k = std::max<std::size_t>(image_refs.size(), tmpl.exemplars.size() + 1);
       k-- > 0;) {
    const std::string ref = k < image_refs.size() ? image_refs[k]
                                                  : "<image " + std::to_string(k) + ">";
    replace_all(out, "{IMAGE_" + std::to_string(k) + "}", ref);
  }
  return out;
}

RegionProposal parse_proposal(const std::string& raw, ParseStrictness strictness) {
  const auto json = nlohmann::json::parse(raw, nullptr, false);
  if (!json.is_discarded() && json.is_object()) {
    RegionProposal p;
    try {
      p.not_relevant_objects =
          json.at("not_relevant_objects").get<std::vector<std::string>>();
      p.not_relevant_backgrounds =
          json.at("not_relevant_backgrounds").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ProposalParseError(std::string("proposal JSON: ") + e.what(), raw);
    }
    for (auto& l : p.not_relevant_objects) validate_label(l, raw), l = trim(l);
    for (auto& l : p.not_relevant_backgrounds) validate_label(l, raw), l = trim(l);
    return p;
  }
  if (strictness == ParseStrictness::kStrictJson) {
    throw ProposalParseError("proposal is not a JSON object", raw);
  }

  // Prefer lists introduced by their key names; fall back to the first two
  // bracketed lists in order.
  auto labelled = [&](const std::string& key, std::vector<std::string>& out) {
    const auto at = raw.find(key);
    if (at == std::string::npos) return false;
    std::size_t open, close;
    if (!next_list(raw, at + key.size(), open, close)) return false;
    out = quoted_items(raw.substr(open + 1, close - open - 1), raw);
    return true;
  };
  RegionProposal p;
  const bool has_obj = labelled("not_relevant_objects", p.not_relevant_objects);
  const bool has_bg = labelled("not_relevant_backgrounds", p.not_relevant_backgrounds);
  if (has_obj && has_bg) return p;

  std::vector<std::vector<std::string>> lists;
  std::size_t from = 0, open, close;
  while (lists.size() < 2 && next_list(raw, from, open, close)) {
    lists.push_back(quoted_items(raw.substr(open + 1, close - open - 1), raw));
    from = close + 1;
  }
  if (lists.size() < 2) {
    throw ProposalParseError("expected two bracketed lists in VLM output", raw);
  }
  return {lists[0], lists[1]};
}

ProposalResult propose_regions(VLMBackend& vlm, const Image& obs,
                               const std::string& instruction,
                               const PromptTemplate& tmpl, ParseStrictness strictness) {
  ProposalResponse resp = vlm.propose(obs, instruction, tmpl.id);
  ProposalResult out;
  out.raw = resp.raw;
  if (!resp.raw.empty()) {
    out.proposal = parse_proposal(resp.raw, strictness);
  } else {
    for (const auto& l : resp.not_relevant_objects) validate_label(l, resp.raw);
    for (const auto& l : resp.not_relevant_backgrounds) validate_label(l, resp.raw);
    out.proposal = {std::move(resp.not_relevant_objects),
                    std::move(resp.not_relevant_backgrounds)};
  }
  return out;
}

GroundingResult ground_regions(SegBackend& seg, const Image& obs,
                               const RegionProposal& proposal, double box_threshold,
                               double text_threshold, const Bitmap* exclusion) {
  if (!(box_threshold > 0.0 && box_threshold < 1.0) ||
      !(text_threshold > 0.0 && text_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grounding thresholds must be in (0, 1)");
  }
  GroundingResult out;
  if (proposal.empty()) return out;

  std::vector<std::string> labels;
  std::map<std::string, RegionKind> kinds;
  for (const auto& l : proposal.not_relevant_objects) {
    if (kinds.emplace(l, RegionKind::kObject).second) labels.push_back(l);
  }
  for (const auto& l : proposal.not_relevant_backgrounds) {
    if (kinds.emplace(l, RegionKind::kBackground).second) labels.push_back(l);
  }

  const auto masks = seg.segment(obs, labels, box_threshold, text_threshold);

  std::map<std::string, std::vector<RegionMask>> by_label;
  for (const auto& m : masks) {
    auto kind = kinds.find(m.label);
    if (kind == kinds.end()) continue;  // segmenter answered a label we did not ask for
    if (m.score < box_threshold) continue;
    Bitmap bitmap = rle_decode(m.rle);
    if (bitmap.cols() != obs.width() || bitmap.rows() != obs.height()) {
      throw Error(ErrorCode::kShapeError, "mask for '" + m.label + "' has wrong size");
    }
    if (exclusion != nullptr && (bitmap && *exclusion).any()) {
      bitmap = bitmap && !*exclusion;
      out.clipped.push_back(m.label);
    }
    if (!bitmap.any()) continue;
    by_label[m.label].push_back(RegionMask{m.label, kind->second, std::move(bitmap), m.score});
  }

  for (const auto& label : labels) {
    auto it = by_label.find(label);
    if (it == by_label.end()) {
      out.ungrounded.push_back(label);
      continue;
    }
    auto& instances = it->second;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances.size() > 1) instances[i].label = label + "#" + std::to_string(i + 1);
      out.masks.push_back(std::move(instances[i]));
    }
  }
  return out;
}

}  // namespace byovla
