#pragma once

#include <csignal>
#include <cstdio>
#include <mutex>
#include <string>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "deepck/lm/backend.hpp"
#include "json.hpp"

namespace deepck::lm {

/// Scoring backend served by a child process over newline-delimited JSON on its
/// stdin/stdout. One request per line, one reply per line:
///   {"op":"describe"}                 -> {"name":s, "vocab_size":n, "context_window":n}
///   {"op":"tokenize","text":s}        -> {"ids":[...], "offsets":[[b,e],...]}   (byte offsets)
///   {"op":"detokenize","ids":[...]}   -> {"text":s}
///   {"op":"logprobs","ids":[...]}     -> {"logprobs":[...]}   (next-token, whole vocabulary)
/// A reply carrying "error" raises. tools/hf_lm_server.py implements this for Hugging
/// Face causal language models.
class ExternalBackend final : public Backend {
 public:
  explicit ExternalBackend(const std::string& command) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw Error("pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw Error("fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    out_ = fdopen(to_child[1], "w");
    in_ = fdopen(from_child[0], "r");
    const auto d = call({{"op", "describe"}});
    desc_.name = d.at("name").get<std::string>();
    desc_.vocab_size = d.at("vocab_size").get<std::size_t>();
    desc_.context_window = d.value("context_window", std::size_t{1024});
    desc_.supports_scoring = true;
    desc_.sharing = Sharing::clone_per_worker;
    desc_.validate();
  }

  ~ExternalBackend() override {
    if (out_) std::fclose(out_);
    if (in_) std::fclose(in_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  ExternalBackend(const ExternalBackend&) = delete;
  ExternalBackend& operator=(const ExternalBackend&) = delete;

  const BackendDescriptor& descriptor() const override { return desc_; }

  TokenSequence tokenize(std::string_view text) const override {
    const auto r = call({{"op", "tokenize"}, {"text", std::string(text)}});
    TokenSequence out;
    const auto& ids = r.at("ids");
    const auto& offs = r.at("offsets");
    if (ids.size() != offs.size()) throw Error("external backend: ids and offsets differ in length");
    for (std::size_t i = 0; i < ids.size(); ++i)
      out.push_back(ids[i].get<TokenId>(), {offs[i].at(0).get<std::size_t>(), offs[i].at(1).get<std::size_t>()});
    return out;
  }

  std::string detokenize(std::span<const TokenId> ids) const override {
    return call({{"op", "detokenize"}, {"ids", std::vector<TokenId>(ids.begin(), ids.end())}})
        .at("text")
        .get<std::string>();
  }

  NextTokenDistribution next_token_logprobs(const TokenSequence& prefix) const override {
    check_window(prefix.size());
    auto lp = call({{"op", "logprobs"}, {"ids", prefix.ids}}).at("logprobs").get<std::vector<double>>();
    if (lp.size() != desc_.vocab_size) throw Error("external backend returned a distribution of wrong size");
    return {std::move(lp)};
  }

 private:
  nlohmann::json call(const nlohmann::json& request) const {
    std::lock_guard lock(mu_);
    const auto line = request.dump() + '\n';
    if (std::fputs(line.c_str(), out_) < 0 || std::fflush(out_) != 0) throw Error("external backend closed its input");
    std::string reply;
    char buf[65536];
    while (std::fgets(buf, sizeof buf, in_)) {
      reply += buf;
      if (!reply.empty() && reply.back() == '\n') break;
    }
    if (reply.empty()) throw Error("external backend exited without replying");
    auto j = nlohmann::json::parse(reply);
    if (j.contains("error")) throw Error("external backend: " + j.at("error").get<std::string>());
    return j;
  }

  pid_t pid_ = -1;
  std::FILE* out_ = nullptr;
  std::FILE* in_ = nullptr;
  mutable std::mutex mu_;
  BackendDescriptor desc_;
};

}  // namespace deepck::lm
