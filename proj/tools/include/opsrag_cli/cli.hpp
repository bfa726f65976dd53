#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace opsrag::cli {

enum ExitCode : int { kSuccess = 0, kStageFailure = 1, kConfigFailure = 2 };

// Runs the command line tool in-process. Progress goes to `out`,
// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// A named artifact and the SHA-256 of its contents (for directories, of the
// sorted file names and file digests).
struct ArtifactDigest {
  std::string name;
  std::string sha256;
};

ArtifactDigest digest_artifact(std::string name, const std::filesystem::path& path);

// {stage, inputs_hash, config_hash, outputs_hash, inputs, outputs}. Holds
// logical artifact names only, so moving the work directory does not change
// it.
std::string render_manifest(std::string_view stage, const std::vector<ArtifactDigest>& inputs,
                            std::string_view config_fingerprint, const std::vector<ArtifactDigest>& outputs);

}  // namespace opsrag::cli
