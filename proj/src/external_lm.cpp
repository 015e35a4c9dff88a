#include "selfret/external_lm.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace selfret {

std::vector<double> densify_sparse_logprobs(const SparseLogprobs& sparse,
                                            std::size_t vocab_size) {
  std::vector<bool> listed(vocab_size, false);
  double listed_mass = 0.0;
  for (const auto& [tok, lp] : sparse.entries) {
    if (tok >= vocab_size)
      throw std::runtime_error("external lm: token id out of range");
    if (listed[tok])
      throw std::runtime_error("external lm: duplicate token in response");
    listed[tok] = true;
    listed_mass += std::exp(lp);
  }
  std::size_t n_unlisted = vocab_size - sparse.entries.size();
  double tail_mass = n_unlisted == 0 ? 0.0 : std::exp(sparse.tail_logmass);
  double total = listed_mass + tail_mass;
  if (total <= 0.0)
    throw std::runtime_error("external lm: degenerate distribution");

  double tail_each = n_unlisted == 0 ? 0.0 : tail_mass / static_cast<double>(n_unlisted);
  std::vector<double> out(vocab_size, std::log(tail_each / total));
  for (const auto& [tok, lp] : sparse.entries)
    out[tok] = lp - std::log(total);
  return out;
}

std::string ExternalLM::build_request(std::span<const TokenId> context,
                                      const std::vector<TokenId>* allowed) {
  nlohmann::json j;
  j["version"] = kExternalLmProtocolVersion;
  j["context"] = std::vector<TokenId>(context.begin(), context.end());
  if (allowed) j["allowed"] = *allowed;
  return j.dump();
}

SparseLogprobs ExternalLM::parse_response(const std::string& line,
                                          std::size_t vocab_size) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("external lm: bad response JSON: ") +
                             e.what());
  }
  if (!j.contains("version") ||
      j["version"].get<int>() != kExternalLmProtocolVersion)
    throw std::runtime_error("external lm: missing or unsupported version");
  SparseLogprobs sparse;
  sparse.tail_logmass = j.value("tail_logmass",
                                -std::numeric_limits<double>::infinity());
  for (const auto& pair : j.at("logprobs")) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::runtime_error("external lm: malformed logprobs entry");
    TokenId tok = pair[0].get<TokenId>();
    double lp = pair[1].get<double>();
    if (!std::isfinite(lp) || lp > 0.0)
      throw std::runtime_error("external lm: invalid logprob value");
    if (tok >= vocab_size)
      throw std::runtime_error("external lm: token id out of range");
    sparse.entries.emplace_back(tok, lp);
  }
  if (sparse.entries.empty())
    throw std::runtime_error("external lm: empty logprobs");
  return sparse;
}

ExternalLM::ExternalLM(std::unique_ptr<ExternalLmTransport> transport,
                       std::size_t vocab_size, int max_retries)
    : transport_(std::move(transport)),
      vocab_size_(vocab_size),
      max_retries_(max_retries) {}

std::vector<double> ExternalLM::next_logprobs(
    std::span<const TokenId> context) const {
  std::string req = build_request(context, nullptr);
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    try {
      std::string line = transport_->roundtrip(req);
      SparseLogprobs sparse = parse_response(line, vocab_size_);
      return densify_sparse_logprobs(sparse, vocab_size_);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw std::runtime_error("external lm request failed after " +
                           std::to_string(max_retries_ + 1) +
                           " attempts: " + last_error);
}

SubprocessTransport::SubprocessTransport(const std::string& command) {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw std::runtime_error("external lm: pipe() failed");
  int pid = fork();
  if (pid < 0) throw std::runtime_error("external lm: fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), nullptr);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  child_pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (child_pid_ > 0) {
    int status = 0;
    waitpid(child_pid_, &status, 0);
  }
}

std::string SubprocessTransport::roundtrip(const std::string& request_line) {
  std::string msg = request_line + "\n";
  const char* data = msg.data();
  std::size_t left = msg.size();
  while (left > 0) {
    ssize_t n = write(to_child_, data, left);
    if (n <= 0) throw std::runtime_error("external lm: write to child failed");
    data += n;
    left -= static_cast<std::size_t>(n);
  }
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n <= 0) throw std::runtime_error("external lm: child closed pipe");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

struct HttpTransport::Impl {
  httplib::Client client;
  explicit Impl(const std::string& url) : client(url) {}
};

HttpTransport::HttpTransport(const std::string& url, int timeout_sec)
    : impl_(std::make_unique<Impl>(url)) {
  impl_->client.set_read_timeout(timeout_sec, 0);
  impl_->client.set_write_timeout(timeout_sec, 0);
}

HttpTransport::~HttpTransport() = default;

std::string HttpTransport::roundtrip(const std::string& request_line) {
  auto res = impl_->client.Post("/logprobs", request_line, "application/json");
  if (!res)
    throw std::runtime_error("external lm: http request failed (timeout?)");
  if (res->status != 200)
    throw std::runtime_error("external lm: http status " +
                             std::to_string(res->status));
  return res->body;
}

std::unique_ptr<LanguageModel> open_external_lm(const std::string& descriptor,
                                                std::size_t vocab_size) {
  std::unique_ptr<ExternalLmTransport> transport;
  if (descriptor.rfind("cmd:", 0) == 0) {
    transport = std::make_unique<SubprocessTransport>(descriptor.substr(4));
  } else if (descriptor.rfind("http://", 0) == 0 ||
             descriptor.rfind("https://", 0) == 0) {
    transport = std::make_unique<HttpTransport>(descriptor);
  } else {
    throw std::runtime_error("unknown external lm descriptor: " + descriptor);
  }
  return std::make_unique<ExternalLM>(std::move(transport), vocab_size);
}

}  // namespace selfret
