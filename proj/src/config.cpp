#include "selfret/config.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace selfret {

std::string render_template(
    std::string tmpl,
    const std::vector<std::pair<std::string, std::string>>& slots) {
  for (const auto& [name, value] : slots) {
    const std::string key = "{" + name + "}";
    std::size_t pos = 0;
    while ((pos = tmpl.find(key, pos)) != std::string::npos) {
      tmpl.replace(pos, key.size(), value);
      pos += value.size();
    }
  }
  return tmpl;
}

std::string PromptTemplates::render_retrieval(const std::string& query) const {
  return render_template(retrieval, {{"query", query}});
}

std::string PromptTemplates::render_passage(const std::string& query,
                                            const std::string& title) const {
  return render_template(passage, {{"query", query}, {"title", title}});
}

std::string PromptTemplates::render_assessment(const std::string& query,
                                               const std::string& title,
                                               const std::string& psg) const {
  return render_template(
      assessment, {{"query", query}, {"title", title}, {"passage", psg}});
}

std::string PromptTemplates::render_rag(const std::string& query,
                                        const std::string& title,
                                        const std::string& psg,
                                        const std::string& verdict) const {
  return render_template(rag, {{"query", query},
                               {"title", title},
                               {"passage", psg},
                               {"assessment", verdict}});
}

std::vector<std::string> PromptTemplates::literals(
    const RankConfig& rank) const {
  return {
      render_template(retrieval, {{"query", ""}}),
      render_template(passage, {{"query", ""}, {"title", ""}}),
      render_template(assessment,
                      {{"query", ""}, {"title", ""}, {"passage", ""}}),
      render_template(rag, {{"query", ""},
                            {"title", ""},
                            {"passage", ""},
                            {"assessment", ""}}),
      rank.rejection_template,
      rank.acceptance_template,
  };
}

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

EngineConfig EngineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  nlohmann::json j;
  in >> j;
  EngineConfig cfg;
  if (j.contains("decode")) {
    const auto& d = j["decode"];
    maybe(d, "title_beam", cfg.decode.title_beam);
    maybe(d, "passage_beam", cfg.decode.passage_beam);
    maybe(d, "max_title_tokens", cfg.decode.max_title_tokens);
    maybe(d, "max_passage_tokens", cfg.decode.max_passage_tokens);
    maybe(d, "max_answer_tokens", cfg.decode.max_answer_tokens);
    maybe(d, "early_termination", cfg.decode.early_termination);
  }
  if (j.contains("rank")) {
    const auto& r = j["rank"];
    maybe(r, "tau", cfg.rank.tau);
    maybe(r, "delta", cfg.rank.delta);
    maybe(r, "rejection_template", cfg.rank.rejection_template);
    maybe(r, "acceptance_template", cfg.rank.acceptance_template);
    maybe(r, "length_normalize_titles", cfg.rank.length_normalize_titles);
  }
  if (j.contains("prompts")) {
    const auto& p = j["prompts"];
    maybe(p, "retrieval", cfg.prompts.retrieval);
    maybe(p, "passage", cfg.prompts.passage);
    maybe(p, "assessment", cfg.prompts.assessment);
    maybe(p, "rag", cfg.prompts.rag);
  }
  maybe(j, "seed", cfg.seed);
  if (cfg.rank.tau <= 0.0) throw std::runtime_error("config: tau must be > 0");
  if (cfg.rank.delta <= 0.0)
    throw std::runtime_error("config: delta must be > 0");
  if (cfg.rank.rejection_template.empty() ||
      cfg.rank.acceptance_template.empty())
    throw std::runtime_error("config: assessment templates must be non-empty");
  return cfg;
}

void EngineConfig::save(const std::string& path) const {
  nlohmann::json j;
  j["decode"] = {{"title_beam", decode.title_beam},
                 {"passage_beam", decode.passage_beam},
                 {"max_title_tokens", decode.max_title_tokens},
                 {"max_passage_tokens", decode.max_passage_tokens},
                 {"max_answer_tokens", decode.max_answer_tokens},
                 {"early_termination", decode.early_termination}};
  j["rank"] = {{"tau", rank.tau},
               {"delta", rank.delta},
               {"rejection_template", rank.rejection_template},
               {"acceptance_template", rank.acceptance_template},
               {"length_normalize_titles", rank.length_normalize_titles}};
  j["prompts"] = {{"retrieval", prompts.retrieval},
                  {"passage", prompts.passage},
                  {"assessment", prompts.assessment},
                  {"rag", prompts.rag}};
  j["seed"] = seed;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace selfret
