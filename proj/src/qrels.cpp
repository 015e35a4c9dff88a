#include "selfret/qrels.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace selfret {

std::vector<Qrel> parse_qrels(std::istream& in) {
  std::vector<Qrel> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() < 3 || cols.size() > 4)
      throw std::runtime_error("qrels line " + std::to_string(line_no) +
                               ": expected 3 or 4 tab-separated fields");
    Qrel q;
    q.query_id = cols[0];
    q.query_text = cols[1];
    q.gold_passage_id = cols[2];
    if (cols.size() == 4) q.answer = cols[3];
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Qrel> load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read qrels file: " + path);
  return parse_qrels(in);
}

}  // namespace selfret
