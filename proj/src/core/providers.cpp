#include "sms/providers.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "sms/error.hpp"
#include "sms/rng.hpp"
#include "sms/scene_io.hpp"

namespace sms {

Endpoint Endpoint::parse(const std::string& url) {
  const std::string scheme = "http://";
  require(url.rfind(scheme, 0) == 0, "endpoint must start with http://: " + url);
  std::string rest = url.substr(scheme.size());
  Endpoint ep;
  const auto slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  ep.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = hostport.rfind(':');
  if (colon != std::string::npos) {
    ep.host = hostport.substr(0, colon);
    try {
      ep.port = std::stoi(hostport.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "bad port in endpoint: " + url);
    }
  } else {
    ep.host = hostport;
  }
  require(!ep.host.empty(), "endpoint has no host: " + url);
  return ep;
}

nlohmann::json post_json(const Endpoint& ep, const nlohmann::json& body, const RetryPolicy& retry) {
  std::string last_error = "no attempts made";
  auto backoff = retry.initial_backoff;
  for (int attempt = 0; attempt < retry.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * retry.multiplier));
    }
    httplib::Client cli(ep.host, ep.port);
    const auto secs = retry.timeout.count() / 1000;
    const auto usecs = (retry.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    auto res = cli.Post(ep.path, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  fail(ErrorCode::Provider, ep.host + ":" + std::to_string(ep.port) + ep.path + " failed after " +
                                std::to_string(retry.attempts) + " attempts (" + last_error + ")");
}

RemoteScorer::RemoteScorer(Endpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {}

double RemoteScorer::logprob(const std::string& prompt, const std::string& completion) {
  const auto reply = post_json(endpoint_, {{"prompt", prompt}, {"completion", completion}}, retry_);
  if (!reply.contains("logprob") || !reply["logprob"].is_number()) {
    fail(ErrorCode::Provider, "scorer response lacks numeric 'logprob'");
  }
  return reply["logprob"].get<double>();
}

RemoteEmbedder::RemoteEmbedder(Endpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {}

std::vector<double> RemoteEmbedder::embed(const std::string& text) {
  const auto reply = post_json(endpoint_, {{"text", text}}, retry_);
  if (!reply.contains("vector") || !reply["vector"].is_array()) {
    fail(ErrorCode::Provider, "embedder response lacks 'vector'");
  }
  return reply["vector"].get<std::vector<double>>();
}

MemoScorer::MemoScorer(CompletionScorer& inner, std::string path)
    : inner_(inner), path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      memo_[{j.at("prompt").get<std::string>(), j.at("completion").get<std::string>()}] =
          j.at("logprob").get<double>();
    } catch (const nlohmann::json::exception&) {
      // a torn trailing line from an interrupted run; the pair is re-queried
    }
  }
}

double MemoScorer::logprob(const std::string& prompt, const std::string& completion) {
  {
    std::lock_guard lock(mu_);
    auto it = memo_.find({prompt, completion});
    if (it != memo_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const double lp = inner_.logprob(prompt, completion);
  std::lock_guard lock(mu_);
  ++misses_;
  if (memo_.emplace(std::make_pair(prompt, completion), lp).second && std::isfinite(lp)) {
    std::ofstream out(path_, std::ios::app);
    out << nlohmann::json{{"prompt", prompt}, {"completion", completion}, {"logprob", lp}}.dump()
        << '\n';
  }
  return lp;
}

std::size_t MemoScorer::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t MemoScorer::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

double ScriptedScorer::logprob(const std::string& prompt, const std::string& completion) {
  const std::uint64_t h = mix_seed(seed_, fnv1a(completion, fnv1a("\x1f", fnv1a(prompt))));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return -1.0 - 9.0 * u;
}

FixtureEmbedder FixtureEmbedder::load(const std::string& path) {
  try {
    const auto doc = nlohmann::json::parse(read_text_file(path));
    return FixtureEmbedder(doc.get<std::map<std::string, std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, "embedding fixture " + path + ": " + e.what());
  }
}

std::vector<double> FixtureEmbedder::embed(const std::string& text) {
  auto it = table_.find(text);
  if (it == table_.end()) fail(ErrorCode::Provider, "no fixture embedding for '" + text + "'");
  return it->second;
}

const char* to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::PromptScorer: return "prompt-scorer";
    case ProviderKind::Embedding: return "embedding";
    case ProviderKind::TaxonomyOracle: return "taxonomy-oracle";
    case ProviderKind::File: return "file";
    case ProviderKind::Scripted: return "scripted";
  }
  return "unknown";
}

ProviderKind provider_kind_from_string(const std::string& s) {
  for (ProviderKind k : {ProviderKind::PromptScorer, ProviderKind::Embedding,
                         ProviderKind::TaxonomyOracle, ProviderKind::File, ProviderKind::Scripted}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown provider kind: " + s);
}

void AffinityProviderSpec::validate() const {
  switch (kind) {
    case ProviderKind::PromptScorer:
      require(!endpoint.empty(), "prompt-scorer provider needs an endpoint");
      break;
    case ProviderKind::Embedding:
      require(!endpoint.empty() || !path.empty(), "embedding provider needs an endpoint or a path");
      require(temperature > 0.0, "embedding temperature must be positive");
      break;
    case ProviderKind::File:
      require(!path.empty(), "file provider needs a path");
      break;
    case ProviderKind::TaxonomyOracle:
    case ProviderKind::Scripted:
      break;
  }
  require(parallelism >= 1, "parallelism must be at least 1");
}

AffinityProviderSpec AffinityProviderSpec::from_json(const nlohmann::json& j) {
  try {
    AffinityProviderSpec s;
    s.kind = provider_kind_from_string(j.at("kind").get<std::string>());
    s.endpoint = j.value("endpoint", std::string());
    s.path = j.value("path", std::string());
    s.memo_path = j.value("memo", std::string());
    s.temperature = j.value("temperature", 1.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.parallelism = j.value("parallelism", kDefaultParallelism);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("provider spec: ") + e.what());
  }
}

nlohmann::json AffinityProviderSpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}};
  if (!endpoint.empty()) j["endpoint"] = endpoint;
  if (!path.empty()) j["path"] = path;
  if (!memo_path.empty()) j["memo"] = memo_path;
  if (kind == ProviderKind::Embedding) j["temperature"] = temperature;
  if (kind == ProviderKind::Scripted) j["seed"] = seed;
  j["parallelism"] = parallelism;
  return j;
}

AffinityMatrix build_affinity(const AffinityProviderSpec& spec, const std::vector<std::string>& labels,
                              const Taxonomy* taxonomy) {
  spec.validate();
  switch (spec.kind) {
    case ProviderKind::TaxonomyOracle: {
      require(taxonomy != nullptr, "taxonomy-oracle provider needs a taxonomy");
      const AffinityMatrix truth = ground_truth_matrix(taxonomy->categories());
      return labels.empty() ? truth : reordered(truth, labels);
    }
    case ProviderKind::File: {
      const AffinityMatrix m = load_affinity(spec.path);
      return labels.empty() ? m : reordered(m, labels);
    }
    case ProviderKind::Scripted: {
      ScriptedScorer scorer(spec.seed);
      return build_matrix_llm(labels, scorer, spec.parallelism);
    }
    case ProviderKind::PromptScorer: {
      RemoteScorer remote(Endpoint::parse(spec.endpoint));
      if (spec.memo_path.empty()) return build_matrix_llm(labels, remote, spec.parallelism);
      MemoScorer memo(remote, spec.memo_path);
      return build_matrix_llm(labels, memo, spec.parallelism);
    }
    case ProviderKind::Embedding: {
      if (!spec.endpoint.empty()) {
        RemoteEmbedder remote(Endpoint::parse(spec.endpoint));
        return build_matrix_embedding(labels, remote, spec.temperature, spec.parallelism);
      }
      FixtureEmbedder fixture = FixtureEmbedder::load(spec.path);
      return build_matrix_embedding(labels, fixture, spec.temperature, spec.parallelism);
    }
  }
  fail(ErrorCode::InvalidArgument, "unhandled provider kind");
}

}  // namespace sms
