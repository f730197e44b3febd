#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "otk/bandit.hpp"
#include "otk/synthetic.hpp"

namespace otk {

/// ScorerPlugin over an in-memory dataset: fetch_batch looks up element
/// payloads, score_batch applies a pure function per payload.
class BuiltinScorer : public ScorerPlugin {
public:
    using ScoreFn = std::function<Score(const Payload&)>;

    BuiltinScorer(const Dataset& dataset, std::string name, ScoreFn fn);

    std::vector<Payload> fetch_batch(const std::vector<ElementId>& ids) override;
    std::vector<Score> score_batch(const std::vector<Payload>& payloads) override;

    const std::string& name() const { return name_; }

private:
    const Dataset* dataset_;
    std::string name_;
    ScoreFn fn_;
};

/// ScorerPlugin backed by a long-lived subprocess speaking line-delimited
/// JSON on its standard streams: one request {"ids": [...], "payloads":
/// [...]} per line, one response {"scores": [...]} per line. Any protocol
/// violation (length mismatch, negative score, early exit) aborts the query.
class ExternalScorer : public ScorerPlugin {
public:
    ExternalScorer(const Dataset& dataset, const std::string& command);
    ~ExternalScorer() override;

    ExternalScorer(const ExternalScorer&) = delete;
    ExternalScorer& operator=(const ExternalScorer&) = delete;

    std::vector<Payload> fetch_batch(const std::vector<ElementId>& ids) override;
    std::vector<Score> score_batch(const std::vector<Payload>& payloads) override;

    const std::string& name() const { return name_; }

private:
    std::string request_line(const std::vector<Payload>& payloads) const;
    std::string read_line();

    const Dataset* dataset_;
    std::string name_;
    std::vector<ElementId> pending_ids_;  // ids of the batch being processed
    int child_pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

/// Build a scorer from a CLI-style spec: "relu" (default), "identity",
/// "constant:<v>", "noop", or "cmd:<shell command>" for a subprocess scorer.
std::unique_ptr<ScorerPlugin> make_scorer(const Dataset& dataset, const std::string& spec);

/// Name used to key ground-truth caches for a scorer spec.
std::string scorer_cache_name(const std::string& spec);

}  // namespace otk
