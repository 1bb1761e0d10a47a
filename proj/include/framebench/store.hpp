#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebench/eval.hpp"
#include "framebench/vignette.hpp"

namespace framebench::store {

/// Version stamped on every stored line and on the manifest.
inline constexpr int kSchemaVersion = 1;

struct ScanResult {
    std::vector<nlohmann::json> lines;
    std::size_t dropped = 0;  ///< unreadable lines (a crash-truncated tail, typically)
    std::vector<std::string> warnings;
};

/// Reads a line-delimited file. A missing file scans as empty. Throws
/// MigrationError when a line carries an unsupported schema_version.
[[nodiscard]] ScanResult scan_lines(const std::filesystem::path& path);

/// Append-only writer. Each line goes out in a single write on an O_APPEND
/// descriptor, so earlier lines are never touched; a partial trailing line
/// left by a crash is terminated before the first new line.
class JsonlAppender {
public:
    explicit JsonlAppender(const std::filesystem::path& path);
    ~JsonlAppender();
    JsonlAppender(const JsonlAppender&) = delete;
    JsonlAppender& operator=(const JsonlAppender&) = delete;

    /// Stamps schema_version and appends one line. Thread-safe.
    void append(nlohmann::json line);
    [[nodiscard]] std::size_t appended() const;

private:
    mutable std::mutex mutex_;
    int fd_ = -1;
    std::filesystem::path path_;
    std::size_t appended_ = 0;
};

void append_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

/// Exclusive advisory lock on a storage directory, held for the lifetime of
/// the object. Throws Error if another process holds it.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    int fd_ = -1;
};

struct Paths {
    std::filesystem::path dir;

    [[nodiscard]] std::filesystem::path vignettes() const { return dir / "vignettes.jsonl"; }
    [[nodiscard]] std::filesystem::path records() const { return dir / "records.jsonl"; }
    [[nodiscard]] std::filesystem::path judgments() const { return dir / "judgments.jsonl"; }
    [[nodiscard]] std::filesystem::path manifest() const { return dir / "manifest.json"; }
    [[nodiscard]] std::filesystem::path audit() const { return dir / "audit.jsonl"; }
};

template <class T>
struct Loaded {
    std::vector<T> items;
    std::size_t dropped = 0;  ///< unreadable lines
    std::size_t invalid = 0;  ///< readable but violating an invariant
    std::vector<std::string> warnings;
};

[[nodiscard]] Loaded<vignette::Vignette> load_vignettes(const std::filesystem::path& path,
                                                        const vignette::ValidationOptions& opts = {});
[[nodiscard]] Loaded<eval::EvaluationRecord> load_records(const std::filesystem::path& path);
[[nodiscard]] Loaded<eval::Judgment> load_judgments(const std::filesystem::path& path);

struct Manifest {
    int schema_version = kSchemaVersion;
    std::string fingerprint;
    std::map<std::string, int> vignette_counts;                      ///< cell_key -> vignettes
    std::map<std::string, std::map<std::string, int>> record_counts;  ///< model -> cell_key -> completed records
    std::map<std::string, int> failure_counts;                       ///< model -> failed or unparseable
    int judgments = 0;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

[[nodiscard]] nlohmann::json to_json(const Manifest& m);
[[nodiscard]] Manifest manifest_from_json(const nlohmann::json& j);

/// Counts derived from the current files.
[[nodiscard]] Manifest compute_manifest(const Paths& paths, const std::string& fingerprint);

/// Missing manifest reads as nullopt.
[[nodiscard]] std::optional<Manifest> read_manifest(const Paths& paths);

/// Rewrites only when the content changed, so an idle rerun leaves the file
/// byte-identical.
void write_manifest(const Paths& paths, const Manifest& m);

/// Differences between a stored manifest and the files (empty when they agree).
[[nodiscard]] std::vector<std::string> verify_manifest(const Manifest& stored, const Manifest& actual);

}  // namespace framebench::store
