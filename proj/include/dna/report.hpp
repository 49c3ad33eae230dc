// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dna/eval.hpp"

namespace dna {

enum class ReportFormat { Json, Csv, Markdown };

std::optional<ReportFormat> format_for_path(std::string_view path);

/// Serialized report.
///
/// json: lossless; `wallclock` is the only run-dependent member.
/// csv: header, one row per episode, one trailing summary row.
/// markdown: one-row accuracy grid, columns = the four splits + Avg.
std::string emit_report(const EvalReport& report, ReportFormat format,
                        bool include_wallclock = true);

EvalReport report_from_json(std::string_view text);

/// Accuracy grid (percent) with one row per report, labeled by mode or by
/// `row_labels` when given.
std::string render_table(std::span<const EvalReport> reports,
                         std::span<const std::string> row_labels = {});

}  // namespace dna
