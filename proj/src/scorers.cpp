#include "otk/scorers.hpp"

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace otk {

namespace {

// writes to a dead subprocess must surface as EPIPE, not kill the process
void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

BuiltinScorer::BuiltinScorer(const Dataset& dataset, std::string name, ScoreFn fn)
    : dataset_(&dataset), name_(std::move(name)), fn_(std::move(fn)) {}

std::vector<Payload> BuiltinScorer::fetch_batch(const std::vector<ElementId>& ids) {
    std::vector<Payload> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const DatasetElement* e = dataset_->find(id);
        if (!e) throw std::runtime_error("scorer: unknown element id '" + id + "'");
        out.emplace_back(e->value);
    }
    return out;
}

std::vector<Score> BuiltinScorer::score_batch(const std::vector<Payload>& payloads) {
    std::vector<Score> out;
    out.reserve(payloads.size());
    for (const auto& p : payloads) out.push_back(fn_(p));
    return out;
}

ExternalScorer::ExternalScorer(const Dataset& dataset, const std::string& command)
    : dataset_(&dataset), name_("cmd:" + command) {
    ignore_sigpipe_once();
    int to_pipe[2];
    int from_pipe[2];
    if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0)
        throw std::runtime_error("external scorer: pipe failed: " + std::string(std::strerror(errno)));

    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("external scorer: fork failed");
    if (pid == 0) {
        dup2(to_pipe[0], STDIN_FILENO);
        dup2(from_pipe[1], STDOUT_FILENO);
        close(to_pipe[0]);
        close(to_pipe[1]);
        close(from_pipe[0]);
        close(from_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_pipe[0]);
    close(from_pipe[1]);
    child_pid_ = pid;
    to_child_ = to_pipe[1];
    from_child_ = from_pipe[0];
}

ExternalScorer::~ExternalScorer() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (child_pid_ > 0) {
        // give the command a moment to exit on EOF, then stop waiting for it
        int status = 0;
        for (int i = 0; i < 200; ++i) {
            if (waitpid(child_pid_, &status, WNOHANG) != 0) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        kill(child_pid_, SIGKILL);
        waitpid(child_pid_, &status, 0);
    }
}

std::vector<Payload> ExternalScorer::fetch_batch(const std::vector<ElementId>& ids) {
    pending_ids_ = ids;
    std::vector<Payload> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const DatasetElement* e = dataset_->find(id);
        if (!e) throw std::runtime_error("external scorer: unknown element id '" + id + "'");
        out.emplace_back(e->value);
    }
    return out;
}

std::string ExternalScorer::request_line(const std::vector<Payload>& payloads) const {
    nlohmann::ordered_json req;
    req["ids"] = pending_ids_;
    req["payloads"] = payloads;
    return req.dump() + "\n";
}

std::string ExternalScorer::read_line() {
    while (true) {
        const auto pos = buffer_.find('\n');
        if (pos != std::string::npos) {
            std::string line = buffer_.substr(0, pos);
            buffer_.erase(0, pos + 1);
            return line;
        }
        char chunk[4096];
        const ssize_t n = read(from_child_, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error("external scorer: read failed: " + std::string(std::strerror(errno)));
        }
        if (n == 0)
            throw std::runtime_error("external scorer: subprocess closed its output (exited?)");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::vector<Score> ExternalScorer::score_batch(const std::vector<Payload>& payloads) {
    if (pending_ids_.size() != payloads.size())
        throw std::runtime_error("external scorer: score_batch called without a matching fetch_batch");

    const std::string req = request_line(payloads);
    std::size_t written = 0;
    while (written < req.size()) {
        const ssize_t n = write(to_child_, req.data() + written, req.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error("external scorer: write failed (subprocess exited?): " +
                                     std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }

    const std::string line = read_line();
    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("external scorer: malformed response line: " + std::string(e.what()));
    }
    if (!resp.is_object() || !resp.contains("scores") || !resp["scores"].is_array())
        throw std::runtime_error("external scorer: response missing scores array");
    const auto& scores_json = resp["scores"];
    if (scores_json.size() != payloads.size())
        throw std::runtime_error("external scorer: expected " + std::to_string(payloads.size()) +
                                 " scores, got " + std::to_string(scores_json.size()));
    std::vector<Score> out;
    out.reserve(scores_json.size());
    for (const auto& s : scores_json) {
        if (!s.is_number())
            throw std::runtime_error("external scorer: score is not a number");
        const double v = s.get<double>();
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::runtime_error("external scorer: score must be non-negative and finite");
        out.push_back(v);
    }
    return out;
}

std::unique_ptr<ScorerPlugin> make_scorer(const Dataset& dataset, const std::string& spec) {
    if (spec.rfind("cmd:", 0) == 0)
        return std::make_unique<ExternalScorer>(dataset, spec.substr(4));
    if (spec.empty() || spec == "relu")
        return std::make_unique<BuiltinScorer>(dataset, "relu", [](const Payload& p) {
            return std::max(0.0, p.get<double>());
        });
    if (spec == "identity")
        return std::make_unique<BuiltinScorer>(dataset, "identity", [](const Payload& p) {
            return p.get<double>();
        });
    if (spec == "noop")
        return std::make_unique<BuiltinScorer>(dataset, "noop", [](const Payload&) { return 0.0; });
    if (spec.rfind("constant:", 0) == 0) {
        const double v = std::stod(spec.substr(9));
        return std::make_unique<BuiltinScorer>(dataset, spec, [v](const Payload&) { return v; });
    }
    throw std::invalid_argument("unknown scorer spec: " + spec +
                                " (expected relu, identity, noop, constant:<v> or cmd:<command>)");
}

std::string scorer_cache_name(const std::string& spec) {
    return spec.empty() ? "relu" : spec;
}

}  // namespace otk
