#pragma once

#include <string>
#include <string_view>

namespace opsrag {

enum class QaMode { kKnowledgeAcquisition, kTroubleshooting };

std::string_view to_string(QaMode mode);  // "ka" / "ts"
QaMode parse_qa_mode(std::string_view text);

namespace prompts {

// Data preparation prompts.
extern const std::string_view kDistillation;
extern const std::string_view kRewrite;

// Instruction templates; "{question}" and "{segments}" are substituted.
extern const std::string_view kKnowledgeAcquisitionTemplate;
extern const std::string_view kTroubleshootingTemplate;

// Judge instructions per task and mode.
extern const std::string_view kJudgeSingleKa;
extern const std::string_view kJudgePairwiseKa;
extern const std::string_view kJudgeSingleTs;
extern const std::string_view kJudgePairwiseTs;

// Markers the mock backend uses to recognize prompt kinds.
extern const std::string_view kDistillationMarker;
extern const std::string_view kRewriteMarker;
extern const std::string_view kJudgeMarker;
extern const std::string_view kPairwiseMarker;

std::string distillation(std::string_view content);
std::string rewrite(std::string_view sentence);
std::string judge_single(QaMode mode, std::string_view question, std::string_view reference,
                         std::string_view answer);
std::string judge_pairwise(QaMode mode, std::string_view question, std::string_view reference,
                           std::string_view answer_a, std::string_view answer_b);

// Replaces every occurrence of each {key}.
std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value);

}  // namespace prompts
}  // namespace opsrag
