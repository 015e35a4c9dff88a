#pragma once

#include <istream>
#include <string>
#include <vector>

namespace selfret {

// One qrels row: query_id \t query_text \t gold_passage_id \t answer?
struct Qrel {
  std::string query_id;
  std::string query_text;
  std::string gold_passage_id;
  std::string answer;  // optional
};

std::vector<Qrel> parse_qrels(std::istream& in);
std::vector<Qrel> load_qrels(const std::string& path);

}  // namespace selfret
