#include "orthoai/report_store.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"

namespace orthoai::store {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHashChars = 16;

struct Entry {
  std::string id;
  std::string hash;
  fs::path path;
};

// <id>.<16 hex>.<ext>
std::optional<Entry> parse_name(const fs::path& p, std::string_view ext) {
  const std::string name = p.filename().string();
  const std::string suffix = "." + std::string(ext);
  if (name.size() <= suffix.size() + kHashChars + 1) return std::nullopt;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
  const std::string stem = name.substr(0, name.size() - suffix.size());
  const auto dot = stem.rfind('.');
  if (dot == std::string::npos || stem.size() - dot - 1 != kHashChars) return std::nullopt;
  Entry e{stem.substr(0, dot), stem.substr(dot + 1), p};
  if (e.id.empty() || e.id.find('.') != std::string::npos) return std::nullopt;
  if (!std::all_of(e.hash.begin(), e.hash.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
    return std::nullopt;
  }
  return e;
}

std::vector<Entry> entries(const fs::path& dir, std::string_view ext, std::string_view only_id = {}) {
  std::vector<Entry> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& de : fs::directory_iterator(dir, ec)) {
    if (!de.is_regular_file()) continue;
    auto e = parse_name(de.path(), ext);
    if (!e || (!only_id.empty() && e->id != only_id)) continue;
    out.push_back(std::move(*e));
  }
  std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::atomic<unsigned> temp_counter{0};

}  // namespace

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::Case: return "case";
    case Kind::Plan: return "plan";
    case Kind::Cloud: return "cloud";
    case Kind::Checkpoint: return "checkpoint";
    case Kind::TrainConfig: return "train-config";
    case Kind::Report: return "report";
    case Kind::History: return "history";
    case Kind::Metrics: return "metrics";
  }
  return "?";
}

std::string_view kind_dir(Kind kind) {
  switch (kind) {
    case Kind::Case:
    case Kind::Plan: return "cases";
    case Kind::Cloud: return "clouds";
    case Kind::Checkpoint:
    case Kind::TrainConfig: return "models";
    case Kind::Report:
    case Kind::Metrics: return "reports";
    case Kind::History: return "history";
  }
  return "misc";
}

std::string_view kind_ext(Kind kind) {
  switch (kind) {
    case Kind::Case: return "case.json";
    case Kind::Plan: return "plan.json";
    case Kind::Cloud: return "ply";
    case Kind::Checkpoint: return "ckpt";
    case Kind::TrainConfig: return "train.json";
    case Kind::Report: return "report.json";
    case Kind::Metrics: return "metrics.json";
    case Kind::History: return "jsonl";
  }
  return "bin";
}

void validate_id(std::string_view id) {
  const bool ok = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
  if (!ok) throw Error(Errc::InvalidConfig, "artifact id '" + std::string(id) + "' must match [A-Za-z0-9_-]+");
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (const char* d : {"cases", "clouds", "models", "reports", "history"}) {
    fs::create_directories(root_ / d, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + (root_ / d).string() + ": " + ec.message());
  }
}

fs::path Workspace::put(Kind kind, std::string_view id, std::string_view bytes) {
  validate_id(id);
  const fs::path dir = root_ / kind_dir(kind);
  const std::string hash = short_digest(bytes, kHashChars);
  const fs::path target = dir / (std::string(id) + "." + hash + "." + std::string(kind_ext(kind)));

  if (!fs::exists(target)) {
    const fs::path temp = dir / (".tmp-" + std::string(id) + "-" + std::to_string(::getpid()) + "-" +
                                 std::to_string(temp_counter++));
    try {
      {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::Io, "cannot write " + temp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(Errc::Io, "short write to " + temp.string());
      }
      if (before_rename_) before_rename_(temp);
      fs::rename(temp, target);
    } catch (...) {
      std::error_code ec;
      fs::remove(temp, ec);
      throw;
    }
  }
  // one blob per id: drop superseded versions
  for (const auto& e : entries(dir, kind_ext(kind), id)) {
    if (e.path != target) {
      std::error_code ec;
      fs::remove(e.path, ec);
    }
  }
  return target;
}

std::optional<fs::path> Workspace::locate(Kind kind, std::string_view id) const {
  auto found = entries(root_ / kind_dir(kind), kind_ext(kind), id);
  if (found.empty()) return std::nullopt;
  return found.back().path;
}

std::string Workspace::get(Kind kind, std::string_view id) const {
  validate_id(id);
  const auto found = entries(root_ / kind_dir(kind), kind_ext(kind), id);
  if (found.empty()) {
    throw Error(Errc::NotFound, std::string(kind_name(kind)) + " '" + std::string(id) + "' not in workspace");
  }
  const auto& e = found.back();
  std::string bytes = read_file(e.path);
  if (short_digest(bytes, kHashChars) != e.hash) {
    throw Error(Errc::CorruptArtifact, e.path.filename().string() + " does not match its content hash");
  }
  return bytes;
}

std::vector<std::string> Workspace::list(Kind kind) const {
  std::vector<std::string> ids;
  for (const auto& e : entries(root_ / kind_dir(kind), kind_ext(kind))) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

fs::path Workspace::put_case(const cases::ArchCase& c) { return put(Kind::Case, c.case_id, cases::serialize_landmark_file(c)); }

cases::ArchCase Workspace::get_case(std::string_view id) const { return cases::parse_landmark_file(get(Kind::Case, id)); }

fs::path Workspace::put_plan(std::string_view id, const cases::MovementPlan& plan) {
  return put(Kind::Plan, id, cases::serialize_plan(plan));
}

cases::MovementPlan Workspace::get_plan(std::string_view id) const { return cases::parse_plan_file(get(Kind::Plan, id)); }

fs::path Workspace::put_cloud(const synth::LabeledCloud& cloud, const synth::PlyMetadata& meta) {
  return put(Kind::Cloud, cloud.case_id, synth::write_ply(cloud, meta));
}

synth::LabeledCloud Workspace::get_cloud(std::string_view id, synth::PlyMetadata* meta) const {
  return synth::read_ply(get(Kind::Cloud, id), meta);
}

fs::path Workspace::put_report(const mcda::Assessment& a) { return put(Kind::Report, a.case_id, a.to_json()); }

mcda::Assessment Workspace::get_report(std::string_view id, const csp::KnowledgeBase& kb) const {
  return mcda::Assessment::from_json(get(Kind::Report, id), kb);
}

fs::path Workspace::put_history(std::string_view id, std::span<const segnet::EpochRecord> history) {
  return put(Kind::History, id, segnet::history_to_jsonl(history));
}

std::vector<segnet::EpochRecord> Workspace::get_history(std::string_view id) const {
  return segnet::history_from_jsonl(get(Kind::History, id));
}

}  // namespace orthoai::store
