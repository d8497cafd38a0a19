#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cli/config.hpp"

namespace lmdx::cli {

// Subcommand bodies. Each returns the process exit code: 0 for success, 1
// when some documents failed but the batch finished. Fatal problems (bad
// config, unreadable schema, unwritable output) throw lmdx::Error and are
// mapped to exit code 2 by the caller.

int cmd_chunk(const std::vector<std::string>& doc_paths,
              const std::string& schema_path, const PipelineConfig& config,
              const std::string& out_path);

int cmd_prompt(const std::string& chunks_manifest_path,
               const std::string& schema_path, const PipelineConfig& config,
               const std::string& out_dir);

int cmd_extract(const std::vector<std::string>& doc_paths,
                const std::string& schema_path, const PipelineConfig& config,
                const std::string& out_dir);

int cmd_decode(const std::string& fixture_path,
               const std::string& chunks_manifest_path,
               const std::string& schema_path, const PipelineConfig& config,
               const std::string& out_dir);

int cmd_eval(const std::vector<std::string>& prediction_paths,
             const std::vector<std::string>& groundtruth_paths,
             const std::vector<std::string>& doc_paths,
             const std::string& schema_path, const PipelineConfig& config,
             const std::string& out_path);

int cmd_stats(const std::vector<std::string>& doc_paths,
              const std::string& schema_path,
              const std::vector<std::string>& scheme_specs,
              const std::vector<std::string>& groundtruth_paths,
              const PipelineConfig& config, const std::string& out_path);

int cmd_icl(const std::string& pool_path, const std::string& target_doc_path,
            const std::string& schema_path, std::size_t exemplar_count,
            const std::string& method, const PipelineConfig& config,
            const std::string& out_path);

}  // namespace lmdx::cli
