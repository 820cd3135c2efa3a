#include "scotbench/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include "scotbench/error.hpp"
#include "scotbench/util.hpp"

namespace scotbench::sandbox {

namespace fs = std::filesystem;

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "Pass";
        case Verdict::WrongAnswer: return "WrongAnswer";
        case Verdict::CompileError: return "CompileError";
        case Verdict::RuntimeError: return "RuntimeError";
        case Verdict::Timeout: return "Timeout";
        case Verdict::ResourceLimit: return "ResourceLimit";
        case Verdict::HarnessError: return "HarnessError";
    }
    return "HarnessError";
}

Verdict parse_verdict(std::string_view name) {
    for (auto v : {Verdict::Pass, Verdict::WrongAnswer, Verdict::CompileError, Verdict::RuntimeError,
                   Verdict::Timeout, Verdict::ResourceLimit, Verdict::HarnessError}) {
        if (name == to_string(v)) return v;
    }
    throw Error(ErrorKind::argument, "unknown verdict '" + std::string(name) + "'");
}

void ExecPolicy::validate() const {
    if (!(wall_timeout_s > 0) || !(cpu_timeout_s > 0) || !(compile_timeout_s > 0)) {
        throw Error(ErrorKind::config, "execution timeouts must be positive");
    }
    if (wall_timeout_s < cpu_timeout_s) {
        throw Error(ErrorKind::config, "wall timeout must be at least the CPU timeout");
    }
    if (max_output_bytes == 0) throw Error(ErrorKind::config, "max_output_bytes must be positive");
    if (max_memory_bytes && *max_memory_bytes == 0) throw Error(ErrorKind::config, "max_memory_bytes must be positive");
    if (python_cmd.empty() || cpp_cmd.empty()) throw Error(ErrorKind::config, "runner commands must not be empty");
}

nlohmann::ordered_json to_json(const ExecutionResult& r) {
    nlohmann::ordered_json j;
    j["verdict"] = to_string(r.verdict);
    j["exit_code"] = r.exit_code ? nlohmann::ordered_json(*r.exit_code) : nlohmann::ordered_json(nullptr);
    j["duration_ms"] = r.duration_ms;
    j["stdout_tail"] = r.stdout_tail;
    j["stderr_tail"] = r.stderr_tail;
    j["reason"] = r.reason;
    return j;
}

ExecutionResult execution_result_from_json(const nlohmann::json& j) {
    ExecutionResult r;
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (j.contains("exit_code") && !j["exit_code"].is_null()) r.exit_code = j["exit_code"].get<int>();
    r.duration_ms = j.value("duration_ms", std::int64_t{0});
    r.stdout_tail = j.value("stdout_tail", "");
    r.stderr_tail = j.value("stderr_tail", "");
    r.reason = j.value("reason", "");
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;

// Keeps the last `cap` bytes of a stream.
class TailBuffer {
public:
    explicit TailBuffer(std::size_t cap) : cap_(cap) {}

    void append(const char* data, std::size_t n) {
        buf_.append(data, n);
        if (buf_.size() > 2 * cap_) {
            buf_.erase(0, buf_.size() - cap_);
            truncated_ = true;
        }
    }

    std::string take() {
        if (buf_.size() > cap_) {
            buf_.erase(0, buf_.size() - cap_);
            truncated_ = true;
        }
        return std::move(buf_);
    }

    bool truncated() const { return truncated_ || buf_.size() > cap_; }

private:
    std::size_t cap_;
    std::string buf_;
    bool truncated_ = false;
};

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

bool make_pipe(Fd& read_end, Fd& write_end) {
    int p[2];
    if (::pipe2(p, O_CLOEXEC) != 0) return false;
    read_end.fd = p[0];
    write_end.fd = p[1];
    return true;
}

[[noreturn]] void child_exec(char* const* argv, const char* workdir, const ProcessLimits& limits, int out_fd,
                             int err_fd, int report_fd) {
    ::setpgid(0, 0);
    if (limits.deny_network) ::unshare(CLONE_NEWNET);  // best effort; needs privileges
    if (limits.cpu_timeout_s) {
        rlimit rl{};
        rl.rlim_cur = static_cast<rlim_t>(std::ceil(*limits.cpu_timeout_s));
        rl.rlim_max = rl.rlim_cur + 1;
        ::setrlimit(RLIMIT_CPU, &rl);
    }
    if (limits.max_memory_bytes) {
        rlimit rl{};
        rl.rlim_cur = rl.rlim_max = static_cast<rlim_t>(*limits.max_memory_bytes);
        ::setrlimit(RLIMIT_AS, &rl);
    }
    rlimit core{};
    ::setrlimit(RLIMIT_CORE, &core);
    int in = ::open("/dev/null", O_RDONLY);
    if (in >= 0) ::dup2(in, 0);
    ::dup2(out_fd, 1);
    ::dup2(err_fd, 2);
    if (::chdir(workdir) == 0) ::execvp(argv[0], argv);
    const int err = errno;
    [[maybe_unused]] auto n = ::write(report_fd, &err, sizeof err);
    ::_exit(127);
}

}  // namespace

RawOutcome run_process(const std::vector<std::string>& argv, const fs::path& workdir, const ProcessLimits& limits) {
    RawOutcome outcome;
    if (argv.empty()) {
        outcome.error = "empty command";
        return outcome;
    }
    std::vector<std::string> args = argv;
    std::vector<char*> cargv;
    for (auto& a : args) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    const std::string dir = workdir.string();

    Fd out_r, out_w, err_r, err_w, rep_r, rep_w;
    if (!make_pipe(out_r, out_w) || !make_pipe(err_r, err_w) || !make_pipe(rep_r, rep_w)) {
        outcome.error = std::string("pipe failed: ") + std::strerror(errno);
        return outcome;
    }

    const auto start = Clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        outcome.error = std::string("fork failed: ") + std::strerror(errno);
        return outcome;
    }
    if (pid == 0) child_exec(cargv.data(), dir.c_str(), limits, out_w.fd, err_w.fd, rep_w.fd);

    ::setpgid(pid, pid);  // mirror the child's call to avoid a race with kill(-pid)
    out_w.reset();
    err_w.reset();
    rep_w.reset();

    int exec_errno = 0;
    const auto got = ::read(rep_r.fd, &exec_errno, sizeof exec_errno);
    if (got == static_cast<ssize_t>(sizeof exec_errno)) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        outcome.status = OutcomeStatus::spawn_failed;
        outcome.error = "cannot execute '" + argv[0] + "': " + std::strerror(exec_errno);
        outcome.duration_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
        return outcome;
    }

    const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(limits.wall_timeout_s));
    TailBuffer out_tail(limits.max_output_bytes), err_tail(limits.max_output_bytes);
    bool timed_out = false;
    bool reaped = false;
    int status = 0;
    rusage usage{};
    char buf[16384];

    auto drain = [&](Fd& fd, TailBuffer& tail) {
        const auto n = ::read(fd.fd, buf, sizeof buf);
        if (n > 0) {
            tail.append(buf, static_cast<std::size_t>(n));
        } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
            fd.reset();
        }
    };

    while (!reaped) {
        if (!timed_out && Clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            timed_out = true;
        }
        pollfd fds[2];
        nfds_t nfds = 0;
        if (out_r.fd >= 0) fds[nfds++] = {out_r.fd, POLLIN, 0};
        if (err_r.fd >= 0) fds[nfds++] = {err_r.fd, POLLIN, 0};
        if (nfds > 0) {
            const int rc = ::poll(fds, nfds, 20);
            if (rc > 0) {
                for (nfds_t i = 0; i < nfds; ++i) {
                    if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
                    if (fds[i].fd == out_r.fd) drain(out_r, out_tail);
                    else drain(err_r, err_tail);
                }
            }
        } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        const pid_t w = ::wait4(pid, &status, WNOHANG, &usage);
        if (w == pid) reaped = true;
    }
    // Stray descendants may still hold the pipes open.
    ::kill(-pid, SIGKILL);
    for (auto* fd : {&out_r, &err_r}) {
        if (fd->fd < 0) continue;
        ::fcntl(fd->fd, F_SETFL, O_NONBLOCK);
        auto& tail = fd == &out_r ? out_tail : err_tail;
        for (ssize_t n; (n = ::read(fd->fd, buf, sizeof buf)) > 0;) tail.append(buf, static_cast<std::size_t>(n));
    }

    outcome.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    outcome.output_truncated = out_tail.truncated() || err_tail.truncated();
    outcome.stdout_tail = out_tail.take();
    outcome.stderr_tail = err_tail.take();

    const double cpu_used = static_cast<double>(usage.ru_utime.tv_sec + usage.ru_stime.tv_sec) +
                            static_cast<double>(usage.ru_utime.tv_usec + usage.ru_stime.tv_usec) / 1e6;
    if (WIFEXITED(status)) {
        outcome.status = OutcomeStatus::exited;
        outcome.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        outcome.status = OutcomeStatus::signaled;
        outcome.signal = WTERMSIG(status);
    }
    if (timed_out) {
        outcome.status = OutcomeStatus::wall_timeout;
    } else if (outcome.status == OutcomeStatus::signaled &&
               (outcome.signal == SIGXCPU ||
                (outcome.signal == SIGKILL && limits.cpu_timeout_s && cpu_used >= *limits.cpu_timeout_s))) {
        outcome.status = OutcomeStatus::cpu_limit;
    }
    return outcome;
}

namespace {

ProcessLimits run_limits(const ExecPolicy& policy) {
    ProcessLimits limits;
    limits.wall_timeout_s = policy.wall_timeout_s;
    limits.cpu_timeout_s = policy.cpu_timeout_s;
    limits.max_memory_bytes = policy.max_memory_bytes;
    limits.max_output_bytes = policy.max_output_bytes;
    limits.deny_network = policy.deny_network;
    return limits;
}

}  // namespace

RawOutcome run_python(const fs::path& program_path, const ExecPolicy& policy) {
    auto argv = policy.python_cmd;
    argv.push_back(program_path.filename().string());
    return run_process(argv, program_path.parent_path(), run_limits(policy));
}

RawOutcome run_cpp(const fs::path& program_path, const ExecPolicy& policy) {
    const auto dir = program_path.parent_path();
    auto argv = policy.cpp_cmd;
    argv.push_back(program_path.filename().string());
    argv.push_back("-o");
    argv.push_back("program.bin");
    ProcessLimits compile;
    compile.wall_timeout_s = policy.compile_timeout_s;
    compile.max_output_bytes = policy.max_output_bytes;
    compile.deny_network = policy.deny_network;
    auto built = run_process(argv, dir, compile);
    if (built.status == OutcomeStatus::spawn_failed) return built;
    if (built.status == OutcomeStatus::wall_timeout) {
        built.status = OutcomeStatus::compile_timeout;
        return built;
    }
    if (built.status != OutcomeStatus::exited || built.exit_code != 0) {
        built.status = OutcomeStatus::compile_failed;
        return built;
    }
    auto ran = run_process({"./program.bin"}, dir, run_limits(policy));
    ran.duration_ms += built.duration_ms;
    return ran;
}

namespace {

std::string last_nonblank_line(std::string_view text) {
    const auto lines = util::split_lines(text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!util::trim(*it).empty()) return util::trim_copy(*it);
    }
    return {};
}

bool python_exception_is(std::string_view last_line, std::string_view name) {
    return util::starts_with(last_line, name) &&
           (last_line.size() == name.size() || last_line[name.size()] == ':');
}

ExecutionResult classify(const RawOutcome& raw, Language lang) {
    ExecutionResult r;
    r.duration_ms = raw.duration_ms;
    r.stdout_tail = raw.stdout_tail;
    r.stderr_tail = raw.stderr_tail;
    if (raw.status == OutcomeStatus::exited) r.exit_code = raw.exit_code;
    switch (raw.status) {
        case OutcomeStatus::spawn_failed:
            r.verdict = Verdict::HarnessError;
            r.reason = raw.error;
            return r;
        case OutcomeStatus::compile_failed:
            r.verdict = Verdict::CompileError;
            r.reason = "compilation failed";
            return r;
        case OutcomeStatus::compile_timeout:
            r.verdict = Verdict::CompileError;
            r.reason = "compilation timed out";
            return r;
        case OutcomeStatus::wall_timeout:
            r.verdict = Verdict::Timeout;
            r.reason = "wall-clock limit exceeded";
            return r;
        case OutcomeStatus::cpu_limit:
            r.verdict = Verdict::Timeout;
            r.reason = "CPU time limit exceeded";
            return r;
        case OutcomeStatus::signaled:
            if (raw.stderr_tail.find("bad_alloc") != std::string::npos || raw.signal == SIGKILL) {
                r.verdict = Verdict::ResourceLimit;
                r.reason = "killed by signal " + std::to_string(raw.signal) + " (resource limit)";
            } else {
                r.verdict = Verdict::RuntimeError;
                r.reason = std::string("killed by signal ") + std::to_string(raw.signal) + " (" +
                           ::strsignal(raw.signal) + ")";
            }
            return r;
        case OutcomeStatus::exited: break;
    }
    if (raw.exit_code == 0) {
        r.verdict = Verdict::Pass;
        return r;
    }
    if (lang == Language::python) {
        const auto last = last_nonblank_line(raw.stderr_tail);
        if (python_exception_is(last, "AssertionError")) {
            r.verdict = Verdict::WrongAnswer;
            r.reason = "assertion failed";
        } else if (python_exception_is(last, "SyntaxError") || python_exception_is(last, "IndentationError") ||
                   python_exception_is(last, "TabError")) {
            r.verdict = Verdict::CompileError;
            r.reason = last;
        } else if (python_exception_is(last, "MemoryError")) {
            r.verdict = Verdict::ResourceLimit;
            r.reason = last;
        } else if (raw.stderr_tail.find("Traceback (most recent call last)") != std::string::npos) {
            r.verdict = Verdict::RuntimeError;
            r.reason = last;
        } else {
            r.verdict = Verdict::WrongAnswer;
            r.reason = "exit code " + std::to_string(raw.exit_code);
        }
    } else {
        r.verdict = raw.exit_code == 1 ? Verdict::WrongAnswer : Verdict::RuntimeError;
        r.reason = "exit code " + std::to_string(raw.exit_code);
    }
    return r;
}

std::string sanitize(std::string_view id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out.empty() ? "_" : out;
}

class TempDir {
public:
    explicit TempDir(const fs::path& root) {
        const auto base = root.empty() ? fs::temp_directory_path() : root;
        fs::create_directories(base);
        auto pattern = (base / "scotbench-XXXXXX").string();
        if (!::mkdtemp(pattern.data())) {
            throw Error(ErrorKind::io, std::string("mkdtemp failed: ") + std::strerror(errno));
        }
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

void save_artifacts(const ExecPolicy& policy, const CandidateProgram& cand, const std::string& program,
                    const ExecutionResult& result) {
    const auto dir = policy.artifacts_dir / sanitize(cand.task_id) / std::to_string(cand.sample_index);
    util::write_file(dir / "program", program);
    util::write_file(dir / "stdout", result.stdout_tail);
    util::write_file(dir / "stderr", result.stderr_tail);
    util::write_file(dir / "result.json", to_json(result).dump(2) + "\n");
}

}  // namespace

ExecutionResult evaluate_candidate(const Task& task, const CandidateProgram& cand, const ExecPolicy& policy) {
    ExecutionResult result;
    std::string program;
    try {
        if (cand.extraction_failed || util::trim(cand.code).empty()) {
            result.verdict = Verdict::WrongAnswer;
            result.reason = "no code could be extracted from the model output";
        } else {
            program = instantiate_test_program(task, cand.code);
            TempDir dir(policy.temp_root);
            const auto file = dir.path() / (task.language == Language::python ? "program.py" : "program.cpp");
            util::write_file(file, program);
            const auto raw = task.language == Language::python ? run_python(file, policy) : run_cpp(file, policy);
            result = classify(raw, task.language);
        }
    } catch (const std::exception& e) {
        result = ExecutionResult{};
        result.verdict = Verdict::HarnessError;
        result.reason = e.what();
    }
    if (policy.keep_artifacts && !policy.artifacts_dir.empty()) {
        try {
            save_artifacts(policy, cand, program, result);
        } catch (const std::exception& e) {
            result.verdict = Verdict::HarnessError;
            result.reason = std::string("cannot save artifacts: ") + e.what();
        }
    }
    return result;
}

std::vector<ExecutionResult> run_batch(const std::vector<BatchItem>& items, const ExecPolicy& policy, int workers) {
    std::vector<ExecutionResult> results(items.size());
    if (workers < 1) workers = 1;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < items.size();) {
            const auto& item = items[i];
            if (!item.task || !item.candidate) {
                results[i].verdict = Verdict::HarnessError;
                results[i].reason = "batch item without task or candidate";
                continue;
            }
            results[i] = evaluate_candidate(*item.task, *item.candidate, policy);
        }
    };
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), items.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < count; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return results;
}

}  // namespace scotbench::sandbox
