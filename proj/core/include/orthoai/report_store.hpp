#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/cloud.hpp"
#include "orthoai/mcda.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::store {

enum class Kind { Case, Plan, Cloud, Checkpoint, TrainConfig, Report, History, Metrics };

std::string_view kind_name(Kind kind);
/// Subdirectory under the workspace root.
std::string_view kind_dir(Kind kind);
/// File extension (without the leading dot); may itself contain dots.
std::string_view kind_ext(Kind kind);

/// Artifacts are stored as <dir>/<id>.<sha16>.<ext>, where sha16 is the first
/// 16 hex digits of the content's SHA-256. One blob per (kind, id).
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Atomic: the payload goes to a temporary file that is renamed into place.
  /// Identical content is not rewritten. Older blobs for the same id are removed.
  std::filesystem::path put(Kind kind, std::string_view id, std::string_view bytes);
  /// NotFound if absent; CorruptArtifact if the content no longer matches its hash.
  std::string get(Kind kind, std::string_view id) const;
  std::optional<std::filesystem::path> locate(Kind kind, std::string_view id) const;
  bool contains(Kind kind, std::string_view id) const { return locate(kind, id).has_value(); }
  /// Ids of the stored artifacts, lexicographically sorted.
  std::vector<std::string> list(Kind kind) const;

  /// Test hook run after the temporary file is written and before the rename.
  /// Throwing from it simulates a crash mid-write.
  void set_before_rename(std::function<void(const std::filesystem::path& temp)> hook) {
    before_rename_ = std::move(hook);
  }

  // Typed helpers.
  std::filesystem::path put_case(const cases::ArchCase& c);
  cases::ArchCase get_case(std::string_view id) const;
  std::filesystem::path put_plan(std::string_view id, const cases::MovementPlan& plan);
  cases::MovementPlan get_plan(std::string_view id) const;
  std::filesystem::path put_cloud(const synth::LabeledCloud& cloud, const synth::PlyMetadata& meta = {});
  synth::LabeledCloud get_cloud(std::string_view id, synth::PlyMetadata* meta = nullptr) const;
  std::filesystem::path put_report(const mcda::Assessment& a);
  mcda::Assessment get_report(std::string_view id, const csp::KnowledgeBase& kb) const;
  std::filesystem::path put_history(std::string_view id, std::span<const segnet::EpochRecord> history);
  std::vector<segnet::EpochRecord> get_history(std::string_view id) const;

 private:
  std::filesystem::path root_;
  std::function<void(const std::filesystem::path&)> before_rename_;
};

/// Throws InvalidConfig unless the id is a non-empty run of [A-Za-z0-9_-].
void validate_id(std::string_view id);

}  // namespace orthoai::store
