#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selfret/lm.hpp"
#include "selfret/types.hpp"

namespace selfret {

inline constexpr int kExternalLmProtocolVersion = 1;

struct SparseLogprobs {
  std::vector<std::pair<TokenId, double>> entries;  // top-m (token, logprob)
  double tail_logmass;  // log mass shared by all unlisted tokens
};

// Spreads the tail mass uniformly over unlisted tokens and renormalizes so
// the dense distribution sums to 1 within 1e-9.
std::vector<double> densify_sparse_logprobs(const SparseLogprobs& sparse,
                                            std::size_t vocab_size);

// One request/response exchange. Implementations: line-protocol subprocess
// and HTTP POST /logprobs; both carry the same JSON schema.
class ExternalLmTransport {
 public:
  virtual ~ExternalLmTransport() = default;
  // request: {"version":1,"context":[...],"allowed":[...]?}
  // response: {"version":1,"logprobs":[[tok,lp],...],"tail_logmass":lp}
  virtual std::string roundtrip(const std::string& request_line) = 0;
};

class SubprocessTransport final : public ExternalLmTransport {
 public:
  explicit SubprocessTransport(const std::string& command);
  ~SubprocessTransport() override;
  std::string roundtrip(const std::string& request_line) override;

 private:
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class HttpTransport final : public ExternalLmTransport {
 public:
  // url: "http://host:port" (POST /logprobs)
  explicit HttpTransport(const std::string& url, int timeout_sec = 30);
  ~HttpTransport() override;
  std::string roundtrip(const std::string& request_line) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class ExternalLM final : public LanguageModel {
 public:
  ExternalLM(std::unique_ptr<ExternalLmTransport> transport,
             std::size_t vocab_size, int max_retries = 2);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_logprobs(
      std::span<const TokenId> context) const override;

  static std::string build_request(std::span<const TokenId> context,
                                   const std::vector<TokenId>* allowed);
  static SparseLogprobs parse_response(const std::string& line,
                                       std::size_t vocab_size);

 private:
  std::unique_ptr<ExternalLmTransport> transport_;
  std::size_t vocab_size_;
  int max_retries_;
};

// "cmd:<command line>" or "http://host:port".
std::unique_ptr<LanguageModel> open_external_lm(const std::string& descriptor,
                                                std::size_t vocab_size);

}  // namespace selfret
