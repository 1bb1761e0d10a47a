#include "framebench/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "framebench/error.hpp"

namespace framebench::store {

using nlohmann::json;

namespace {

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(fmt::format("write to {} failed: {}", path.string(), std::strerror(errno)));
        }
        off += static_cast<std::size_t>(n);
    }
}

bool ends_without_newline(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec || size == 0) return false;
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(size) - 1);
    char c = '\n';
    in.get(c);
    return c != '\n';
}

}  // namespace

ScanResult scan_lines(const std::filesystem::path& path) {
    ScanResult out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            ++out.dropped;
            out.warnings.push_back(fmt::format("{}:{}: unreadable line dropped", path.string(), lineno));
            continue;
        }
        if (!j.is_object()) {
            ++out.dropped;
            out.warnings.push_back(fmt::format("{}:{}: line is not an object, dropped", path.string(), lineno));
            continue;
        }
        const int version = j.value("schema_version", 0);
        if (version != kSchemaVersion) {
            throw MigrationError(version, kSchemaVersion);
        }
        out.lines.push_back(std::move(j));
    }
    return out;
}

JsonlAppender::JsonlAppender(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool repair = ends_without_newline(path);
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw Error(fmt::format("cannot open {} for appending: {}", path.string(), std::strerror(errno)));
    }
    if (repair) {
        write_all(fd_, "\n", path_);
    }
}

JsonlAppender::~JsonlAppender() {
    if (fd_ >= 0) {
        ::fsync(fd_);
        ::close(fd_);
    }
}

void JsonlAppender::append(json line) {
    line["schema_version"] = kSchemaVersion;
    const std::string text = line.dump() + "\n";
    std::lock_guard lock(mutex_);
    write_all(fd_, text, path_);
    ++appended_;
}

std::size_t JsonlAppender::appended() const {
    std::lock_guard lock(mutex_);
    return appended_;
}

void append_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
    JsonlAppender out(path);
    for (const auto& l : lines) out.append(l);
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto lock_path = dir / ".lock";
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw Error(fmt::format("cannot open lock file {}: {}", lock_path.string(), std::strerror(errno)));
    }
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw Error("storage directory " + dir.string() + " is locked by another framebench process");
    }
}

DirectoryLock::~DirectoryLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

Loaded<vignette::Vignette> load_vignettes(const std::filesystem::path& path, const vignette::ValidationOptions& opts) {
    auto scan = scan_lines(path);
    Loaded<vignette::Vignette> out;
    out.dropped = scan.dropped;
    out.warnings = std::move(scan.warnings);
    for (const auto& j : scan.lines) {
        vignette::Vignette v;
        try {
            v = vignette::vignette_from_json(j);
        } catch (const Error& e) {
            ++out.invalid;
            out.warnings.push_back(fmt::format("{}: {}", path.string(), e.what()));
            continue;
        }
        if (const auto reason = vignette::validate(v, opts)) {
            ++out.invalid;
            out.warnings.push_back(fmt::format("{}: vignette {} is invalid: {}", path.string(), v.vignette_id, *reason));
            continue;
        }
        out.items.push_back(std::move(v));
    }
    return out;
}

Loaded<eval::EvaluationRecord> load_records(const std::filesystem::path& path) {
    auto scan = scan_lines(path);
    Loaded<eval::EvaluationRecord> out;
    out.dropped = scan.dropped;
    out.warnings = std::move(scan.warnings);
    for (const auto& j : scan.lines) {
        eval::EvaluationRecord r;
        try {
            r = eval::record_from_json(j);
        } catch (const Error& e) {
            ++out.invalid;
            out.warnings.push_back(fmt::format("{}: {}", path.string(), e.what()));
            continue;
        }
        if (const auto reason = eval::validate(r)) {
            ++out.invalid;
            out.warnings.push_back(fmt::format("{}: record {} is invalid: {}", path.string(), r.record_id, *reason));
            continue;
        }
        out.items.push_back(std::move(r));
    }
    return out;
}

Loaded<eval::Judgment> load_judgments(const std::filesystem::path& path) {
    auto scan = scan_lines(path);
    Loaded<eval::Judgment> out;
    out.dropped = scan.dropped;
    out.warnings = std::move(scan.warnings);
    for (const auto& j : scan.lines) {
        try {
            out.items.push_back(eval::judgment_from_json(j));
        } catch (const Error& e) {
            ++out.invalid;
            out.warnings.push_back(fmt::format("{}: {}", path.string(), e.what()));
        }
    }
    return out;
}

json to_json(const Manifest& m) {
    return {{"schema_version", m.schema_version}, {"fingerprint", m.fingerprint},
            {"vignette_counts", m.vignette_counts}, {"record_counts", m.record_counts},
            {"failure_counts", m.failure_counts},   {"judgments", m.judgments}};
}

Manifest manifest_from_json(const json& j) {
    Manifest m;
    m.schema_version = j.value("schema_version", 0);
    if (m.schema_version != kSchemaVersion) throw MigrationError(m.schema_version, kSchemaVersion);
    try {
        m.fingerprint = j.value("fingerprint", std::string());
        m.vignette_counts = j.value("vignette_counts", std::map<std::string, int>{});
        m.record_counts = j.value("record_counts", std::map<std::string, std::map<std::string, int>>{});
        m.failure_counts = j.value("failure_counts", std::map<std::string, int>{});
        m.judgments = j.value("judgments", 0);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

Manifest compute_manifest(const Paths& paths, const std::string& fingerprint) {
    Manifest m;
    m.fingerprint = fingerprint;
    const auto vignettes = load_vignettes(paths.vignettes(), {false}).items;
    std::map<std::string, std::string> cell_of;
    for (const auto& v : vignettes) {
        const auto key = cell_key(v.cell);
        ++m.vignette_counts[key];
        cell_of[v.vignette_id] = key;
    }
    const auto records = eval::effective_records(load_records(paths.records()).items);
    for (const auto& r : records) {
        if (!r.parseable()) {
            ++m.failure_counts[r.model_id];
            continue;
        }
        const auto it = cell_of.find(r.vignette_id);
        ++m.record_counts[r.model_id][it == cell_of.end() ? std::string("unknown") : it->second];
    }
    m.judgments = static_cast<int>(load_judgments(paths.judgments()).items.size());
    return m;
}

std::optional<Manifest> read_manifest(const Paths& paths) {
    std::ifstream in(paths.manifest());
    if (!in) return std::nullopt;
    try {
        return manifest_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError("manifest " + paths.manifest().string() + " is not JSON: " + e.what());
    }
}

void write_manifest(const Paths& paths, const Manifest& m) {
    const std::string text = to_json(m).dump(2) + "\n";
    {
        std::ifstream in(paths.manifest(), std::ios::binary);
        if (in) {
            std::stringstream current;
            current << in.rdbuf();
            if (current.str() == text) return;
        }
    }
    std::filesystem::create_directories(paths.dir);
    const auto tmp = paths.manifest().string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << text;
    }
    std::filesystem::rename(tmp, paths.manifest());
}

std::vector<std::string> verify_manifest(const Manifest& stored, const Manifest& actual) {
    std::vector<std::string> out;
    if (stored.vignette_counts != actual.vignette_counts) out.emplace_back("vignette counts differ from vignettes file");
    if (stored.record_counts != actual.record_counts) out.emplace_back("record counts differ from records file");
    if (stored.failure_counts != actual.failure_counts) out.emplace_back("failure counts differ from records file");
    if (stored.judgments != actual.judgments) out.emplace_back("judgment count differs from judgments file");
    return out;
}

}  // namespace framebench::store
