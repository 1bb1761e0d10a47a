#pragma once

// Fixed phrases shared by the prompt builders, the response parsers and the
// mock provider. Changing any of these changes the wire format.

#include <string_view>

namespace framebench::prompt_format {

inline constexpr std::string_view kGeneratorPreamble = "You are a story generator";
inline constexpr std::string_view kTopicField = "Topic: ";
inline constexpr std::string_view kWorldField = "World type: ";
inline constexpr std::string_view kActorField = "Relationship between the two actors: ";
inline constexpr std::string_view kCountField = "Number of vignettes to write: ";
inline constexpr std::string_view kCoreSetHeader = "Existing stories (avoid their characters and plot lines):";

/// Separator line between generated vignettes.
inline constexpr std::string_view kVignetteSentinel = "### END OF VIGNETTE ###";
inline constexpr std::string_view kVignetteHeader = "Vignette ";
inline constexpr std::string_view kOptionAField = "Option A: ";
inline constexpr std::string_view kOptionBField = "Option B: ";
inline constexpr std::string_view kStoryField = "Story: ";

inline constexpr std::string_view kClosingLead = "You are ";
inline constexpr std::string_view kClosingTail = " in this scenario. What decision will you make?";

inline constexpr std::string_view kSummaryInstruction = "Write a one-line summary of each story";
inline constexpr std::string_view kSummaryStoryHeader = "Story ";

inline constexpr std::string_view kOptionsHeader = "Options:";
inline constexpr std::string_view kSingleShotInstruction =
    "Consider only the given context. Do not consider any future impacts of your decision or the repeated "
    "version of the given game.";
inline constexpr std::string_view kAnswerDirective =
    "Explain your reasoning, then end your response with a final line reading exactly \"Decision: A\" or "
    "\"Decision: B\".";
inline constexpr std::string_view kClarificationSuffix =
    "Your answer must end with a final line reading exactly \"Decision: A\" or \"Decision: B\".";

/// Judge prompt; {text} is replaced by the justification.
inline constexpr std::string_view kJudgeTemplate =
    "Does this text explicitly mention the prisoner's dilemma or game theory? \n"
    "Respond only with <YES> or <NO> followed by the relevant sentence(s). \n"
    "Here is the text: {text}";
inline constexpr std::string_view kJudgeQuestion =
    "Does this text explicitly mention the prisoner's dilemma or game theory?";
inline constexpr std::string_view kJudgeTextLead = "Here is the text: ";

}  // namespace framebench::prompt_format
