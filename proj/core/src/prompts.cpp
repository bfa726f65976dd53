#include "opsrag/prompts.hpp"

#include "opsrag/error.hpp"

namespace opsrag {

std::string_view to_string(QaMode mode) {
  return mode == QaMode::kKnowledgeAcquisition ? "ka" : "ts";
}

QaMode parse_qa_mode(std::string_view text) {
  if (text == "ka" || text == "knowledge_acquisition") return QaMode::kKnowledgeAcquisition;
  if (text == "ts" || text == "troubleshooting") return QaMode::kTroubleshooting;
  throw Error(Errc::kInvalidArgument, "unknown task '" + std::string(text) + "'");
}

namespace prompts {

const std::string_view kDistillation =
    "Assume you are the IT operation team member and you have some questions to inquire. "
    "Assume the following document can answer your question. What questions and "
    "corresponding answers can you post?\n"
    "\n"
    "Please post as many knowledge based questions as possible.\n"
    "Do not post the question without an answer.\n"
    "Answer should be complete and must be got from the document.\n"
    "Question with very long answer is allowed.\n"
    "If you cannot find any question or cannot provide answer, please respond <unk>.\n"
    "Use <sep> to connect each QA.\n"
    "Content: {content}";

const std::string_view kRewrite =
    "Assume you are the IT operation team member. Please rewrite the following sentence "
    "without changing its meaning.\n"
    "\n"
    "Content: {content}";

const std::string_view kKnowledgeAcquisitionTemplate =
    "Assume you are a customer service representative, and you have received a question from "
    "a user or the operations team:\n"
    "{question}\n"
    "Please answer the user's question concisely and professionally based on the following "
    "known information:\n"
    "{segments}";

const std::string_view kTroubleshootingTemplate =
    "Please conduct a root cause analysis of the sudden AIOPS event based on the error log "
    "below. The analysis should include: 1. Scenario, 2. Problem localization (including "
    "service, method name, function, keywords, event type, event level, impact scope), 3. "
    "Solution (including personnel involved and resolution plan).\n"
    "{question}\n"
    "Below is a historical case:\n"
    "{segments}";

namespace {

constexpr std::string_view kPairwiseIntro =
    "Please act as an impartial evaluator and assess the quality of answers provided by two AI "
    "assistants to a user's question. Your evaluation should consider the correctness and "
    "helpfulness of the answers. You will be given a reference answer, Assistant A's answer, "
    "and Assistant B's answer. Your task is to determine which assistant's answer is better.\n"
    "\n"
    "Evaluation steps:\n"
    "\n"
    "1. Compare both assistants' answers to the reference answer.\n"
    "2. Identify and correct any errors in the assistants' answers.\n"
    "3. Avoid any positional bias, ensuring that the order of the answers does not influence "
    "your decision.\n"
    "4. Do not let the length of the answers affect your assessment.\n"
    "5. Please answer based on facts, expressing the required information for the question.\n"
    "6. Do not favor certain assistant names. Be as objective as possible.\n";

constexpr std::string_view kPairwiseTsStep =
    "7. The reference answer includes 7 fields, each field is worth 1 point, with the solution "
    "field worth 4 points. Please strictly compare the answers of both assistants for each "
    "field and analyze them. Based on the field scores, determine which assistant's answer is "
    "better, or if it's a tie\n";

constexpr std::string_view kPairwiseOutro =
    "\n"
    "After providing your explanation, please output your final verdict in the following JSON "
    "format:\n"
    "\n"
    "```json\n"
    "{\n"
    "  \"verdict\": \"Can only be A or B or Tie\",\n"
    "  \"explanation\": \"Your explanation\"\n"
    "}\n"
    "```";

constexpr std::string_view kSingleIntro =
    "Please act as an impartial evaluator and assess the quality of an answer provided by an AI "
    "assistant to a user's question. We will provide a question, a corresponding reference "
    "answer, and the assistant's answer. Your evaluation should consider the correctness of the "
    "answer.\n"
    "\n"
    "Evaluation steps:\n"
    "\n"
    "1. Please compare the assistant's answer to the reference answer.\n"
    "2. Identify and correct any errors.\n"
    "3. Evaluate as objectively as possible, paying attention to factual errors in the "
    "assistant's answer that are not present in the reference answer.\n"
    "4. If the assistant does not address the content of the reference answer, it will be "
    "scored as 0.\n";

constexpr std::string_view kSingleTsStep =
    "5. The reference answer includes 7 fields, each field is worth 1 point, with the solution "
    "field worth 4 points. For each field in the assistant's answer, please strictly score "
    "according to the field score. If the answer is inaccurate or incorrect for a field, no "
    "points should be awarded for that field.\n";

constexpr std::string_view kSingleOutro =
    "\n"
    "After providing your explanation, you must rate the answer on a scale of 1 to 10 using the "
    "following JSON format:\n"
    "\n"
    "```json\n"
    "{\n"
    "  \"rating\": \"1 to 10\",\n"
    "  \"explanation\": \"Your explanation\"\n"
    "}\n"
    "```";

std::string concat(std::initializer_list<std::string_view> parts) {
  std::string out;
  for (auto p : parts) out += p;
  return out;
}

const std::string kJudgeSingleKaText = concat({kSingleIntro, kSingleOutro});
const std::string kJudgeSingleTsText = concat({kSingleIntro, kSingleTsStep, kSingleOutro});
const std::string kJudgePairwiseKaText = concat({kPairwiseIntro, kPairwiseOutro});
const std::string kJudgePairwiseTsText = concat({kPairwiseIntro, kPairwiseTsStep, kPairwiseOutro});

}  // namespace

const std::string_view kJudgeSingleKa = kJudgeSingleKaText;
const std::string_view kJudgePairwiseKa = kJudgePairwiseKaText;
const std::string_view kJudgeSingleTs = kJudgeSingleTsText;
const std::string_view kJudgePairwiseTs = kJudgePairwiseTsText;

const std::string_view kDistillationMarker = "Please post as many knowledge based questions";
const std::string_view kRewriteMarker = "Please rewrite the following sentence";
const std::string_view kJudgeMarker = "Please act as an impartial evaluator";
const std::string_view kPairwiseMarker = "Assistant A's answer";

std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value) {
  const std::string needle = "{" + std::string(key) + "}";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto hit = tmpl.find(needle, pos);
    if (hit == std::string_view::npos) break;
    out.append(tmpl.substr(pos, hit - pos));
    out.append(value);
    pos = hit + needle.size();
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string distillation(std::string_view content) {
  return substitute(kDistillation, "content", content);
}

std::string rewrite(std::string_view sentence) { return substitute(kRewrite, "content", sentence); }

std::string judge_single(QaMode mode, std::string_view question, std::string_view reference,
                         std::string_view answer) {
  std::string out(mode == QaMode::kTroubleshooting ? kJudgeSingleTs : kJudgeSingleKa);
  out += "\n\n[Question]\n";
  out += question;
  out += "\n\n[Reference Answer]\n";
  out += reference;
  out += "\n\n[Assistant's Answer]\n";
  out += answer;
  return out;
}

std::string judge_pairwise(QaMode mode, std::string_view question, std::string_view reference,
                           std::string_view answer_a, std::string_view answer_b) {
  std::string out(mode == QaMode::kTroubleshooting ? kJudgePairwiseTs : kJudgePairwiseKa);
  out += "\n\n[Question]\n";
  out += question;
  out += "\n\n[Reference Answer]\n";
  out += reference;
  out += "\n\n[Assistant A's Answer]\n";
  out += answer_a;
  out += "\n\n[Assistant B's Answer]\n";
  out += answer_b;
  return out;
}

}  // namespace prompts
}  // namespace opsrag
