#pragma once

#include <string>
#include <vector>

namespace selfret {

struct DecodeConfig {
  int title_beam = 5;
  int passage_beam = 10;
  int max_title_tokens = 48;
  int max_passage_tokens = 512;
  int max_answer_tokens = 64;
  bool early_termination = true;
};

struct RankConfig {
  double tau = 0.4;
  double delta = 0.4;
  std::string rejection_template = "cannot answer the query";
  std::string acceptance_template = "can answer the query";
  bool length_normalize_titles = false;
};

// The backbone's prompt wording is not fixed anywhere upstream, so the
// strings live in config. Slots: {query}, {title}, {passage}, {assessment}.
struct PromptTemplates {
  std::string retrieval = "search : {query} title :";
  std::string passage = "search : {query} title : {title} passage :";
  std::string assessment =
      "assess : {query} title : {title} passage : {passage} verdict :";
  std::string rag =
      "assess : {query} title : {title} passage : {passage} verdict : "
      "{assessment} answer :";

  std::string render_retrieval(const std::string& query) const;
  std::string render_passage(const std::string& query,
                             const std::string& title) const;
  std::string render_assessment(const std::string& query,
                                const std::string& title,
                                const std::string& passage) const;
  std::string render_rag(const std::string& query, const std::string& title,
                         const std::string& passage,
                         const std::string& assessment) const;

  // Every template with slots blanked, for build_vocab extra_texts.
  std::vector<std::string> literals(const RankConfig& rank) const;
};

struct EngineConfig {
  DecodeConfig decode;
  RankConfig rank;
  PromptTemplates prompts;
  std::uint64_t seed = 42;

  static EngineConfig from_file(const std::string& path);
  void save(const std::string& path) const;
};

std::string render_template(std::string tmpl,
                            const std::vector<std::pair<std::string, std::string>>& slots);

}  // namespace selfret
