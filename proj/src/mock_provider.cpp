// Offline provider used by the test suites and by dry runs of the pipeline.
//
// Policy mode answers the four prompt kinds this project sends. Every answer
// is a pure function of (behavior, prompt), so concurrent runs reproduce the
// same bytes regardless of scheduling. Scripted sequences are the exception:
// they are consumed in call order.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "framebench/error.hpp"
#include "framebench/gateway.hpp"
#include "framebench/hash.hpp"
#include "framebench/prompt_format.hpp"

namespace framebench::gateway {

namespace pf = prompt_format;

namespace {

constexpr std::array kFirstNames = {"Amara",  "Bastian", "Celeste", "Dario",  "Elif",   "Farid",  "Greta",
                                    "Hiroshi", "Ingrid", "Jonah",   "Kalani", "Leona",  "Mateo",  "Nadia",
                                    "Oskar",  "Priya",   "Quentin", "Rosa",   "Soren",  "Talia"};
constexpr std::array kLastNames = {"Abernathy", "Bergstrom", "Castellanos", "Delacroix", "Eriksen",
                                   "Fairbanks", "Gallagher", "Holloway",    "Ivanova",   "Jablonski",
                                   "Kowalczyk", "Lindqvist", "Montague",    "Novak",     "Okonkwo",
                                   "Petrovic",  "Quintero",  "Rasmussen",   "Sandoval",  "Thackeray"};
constexpr std::array kImaginaryFirst = {"Aelar", "Brynn",  "Caelum", "Dravik", "Eluned", "Fenwick", "Gorran",
                                        "Hesper", "Isolde", "Jorvik", "Kaelis", "Lyra",   "Morwen",  "Nerys",
                                        "Orrin",  "Peren",  "Quill",  "Rhosyn", "Sable",  "Tamsin"};
constexpr std::array kImaginaryLast = {"of Veyra",     "of Thornhold", "of Kesh",      "of Ambermoor",
                                       "of Drosk",     "of Elowen",    "of Frostmere", "of Galdor",
                                       "of Hallowgate", "of Irongrave", "of Jadeport",  "of Kyrenn",
                                       "of Lumenfall", "of Mirewood",  "of Nightvale", "of Oakenshaw",
                                       "of Pyrelund",  "of Quarrow",   "of Ravenmere", "of Silverfen"};
constexpr std::array kProjects = {"a shared trade corridor",  "a joint research venture", "a water-rights accord",
                                  "a border security pact",   "a media campaign",         "a championship bid",
                                  "a charity festival",       "a mining concession",      "an energy pipeline",
                                  "a vaccine distribution plan", "a museum exhibition",   "a satellite launch",
                                  "a harbor expansion",       "a tariff truce",           "a summit communique"};

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string field_value(std::string_view prompt, std::string_view field) {
    const auto pos = prompt.find(field);
    if (pos == std::string_view::npos) {
        return {};
    }
    const auto start = pos + field.size();
    const auto end = prompt.find('\n', start);
    return std::string(prompt.substr(start, end == std::string_view::npos ? end : end - start));
}

/// `counterpart` picks the opposite half of both name lists, so the two
/// characters of a story never share a first or last name.
std::string person(std::size_t idx, bool imaginary, std::uint64_t salt, bool counterpart = false) {
    const std::size_t nf = kFirstNames.size();
    const std::size_t nl = kLastNames.size();
    const std::size_t f = (idx + salt + (counterpart ? nf / 2 : 0)) % nf;
    const std::size_t l = (idx / nf + (salt >> 8) + (counterpart ? nl / 2 : 0)) % nl;
    std::string name = imaginary ? std::string(kImaginaryFirst[f]) + " " + kImaginaryLast[l]
                                 : std::string(kFirstNames[f]) + " " + kLastNames[l];
    const std::size_t generation = idx / (nf * nl);
    if (generation > 0) {
        name += " the Younger";
        name += std::string(generation - 1, '+');
    }
    return name;
}

std::string storyteller(const MockBehavior& m, std::string_view prompt) {
    const std::string topic = field_value(prompt, pf::kTopicField);
    const std::string world = field_value(prompt, pf::kWorldField);
    const std::string actor = field_value(prompt, pf::kActorField);
    const std::string count_text = field_value(prompt, pf::kCountField);
    const int count = count_text.empty() ? 1 : std::max(1, std::atoi(count_text.c_str()));
    const bool imaginary = contains(lower(world), "imaginary");

    // Stories already in the core set occupy indices [0, existing).
    std::size_t existing = 0;
    if (const auto pos = prompt.find(pf::kCoreSetHeader); pos != std::string_view::npos) {
        std::istringstream in{std::string(prompt.substr(pos))};
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line) && line.rfind("- ", 0) == 0) {
            ++existing;
        }
    }

    const std::uint64_t salt = splitmix64(m.seed ^ fnv1a64(topic + "|" + world + "|" + actor));
    const std::string relation = contains(actor, "allies")    ? "long-standing allies"
                                 : contains(actor, "enemies") ? "bitter enemies"
                                                              : "neutral acquaintances";
    const std::string setting = imaginary ? "an imaginary world" : "the real world";

    std::ostringstream out;
    for (int k = 0; k < count; ++k) {
        const std::size_t idx = existing + static_cast<std::size_t>(k);
        const std::string hero = person(idx, imaginary, salt);
        const std::string other = person(idx, imaginary, salt, true);
        const std::string project = kProjects[splitmix64(salt + idx) % kProjects.size()];
        out << pf::kVignetteHeader << (k + 1) << "\n";
        out << pf::kOptionAField << "work together with " << other << " on " << project << "\n";
        out << pf::kOptionBField << "pursue " << project << " alone at the expense of " << other << "\n";
        out << pf::kStoryField << "In " << setting << ", in the arena of " << topic << ", " << hero << " and "
            << other << " are " << relation << ". Both are weighing " << project
            << ". Each must choose between Decision A, to work together on it, and Decision B, to pursue it alone. "
            << "If both choose Decision A, each enjoys a moderate gain. If " << hero << " chooses Decision A while "
            << other << " chooses Decision B, " << hero << " suffers the worst outcome and " << other
            << " secures the highest. The reverse holds if " << other << " alone chooses Decision A. If both choose "
            << "Decision B, both are left with a low outcome. " << pf::kClosingLead << hero << pf::kClosingTail
            << "\n";
        out << pf::kVignetteSentinel << "\n";
    }
    return out.str();
}

std::string summarizer(std::string_view prompt) {
    // Stories follow "Story <i>:" headers; the protagonist is named in the
    // closing sentence.
    std::ostringstream out;
    std::size_t pos = prompt.find(pf::kSummaryStoryHeader);
    int i = 0;
    while (pos != std::string_view::npos) {
        const std::size_t next = prompt.find(std::string("\n") + std::string(pf::kSummaryStoryHeader), pos + 1);
        const std::string_view story =
            prompt.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        std::string hero = "an unnamed protagonist";
        const auto lead = story.rfind(pf::kClosingLead);
        const auto tail = story.rfind(pf::kClosingTail);
        if (lead != std::string_view::npos && tail != std::string_view::npos && tail > lead) {
            hero = std::string(story.substr(lead + pf::kClosingLead.size(), tail - lead - pf::kClosingLead.size()));
        }
        std::string project = "a shared venture";
        if (const auto w = story.find("Both are weighing "); w != std::string_view::npos) {
            const auto start = w + std::string_view("Both are weighing ").size();
            project = std::string(story.substr(start, story.find('.', start) - start));
        }
        ++i;
        out << i << ". " << hero << " weighs cooperating on " << project << " against going it alone.\n";
        pos = next == std::string_view::npos ? next : next + 1;
    }
    return out.str();
}

std::string judge(std::string_view prompt) {
    const auto lead = prompt.find(pf::kJudgeTextLead);
    const std::string_view text =
        lead == std::string_view::npos ? std::string_view{} : prompt.substr(lead + pf::kJudgeTextLead.size());
    const std::string low = lower(text);
    for (const std::string_view key : {"prisoner's dilemma", "prisoners dilemma", "game theory"}) {
        const auto hit = low.find(key);
        if (hit == std::string::npos) {
            continue;
        }
        auto start = low.rfind('.', hit);
        start = start == std::string::npos ? 0 : start + 1;
        auto end = low.find('.', hit);
        end = end == std::string::npos ? text.size() : end + 1;
        std::string sentence(text.substr(start, end - start));
        sentence.erase(0, sentence.find_first_not_of(" \n"));
        return "<YES> " + sentence;
    }
    return "<NO> The text does not mention the prisoner's dilemma or game theory.";
}

std::string option_text(std::string_view prompt, std::string_view field) {
    const auto header = prompt.rfind(pf::kOptionsHeader);
    const std::string_view block = header == std::string_view::npos ? prompt : prompt.substr(header);
    return field_value(block, field);
}

std::string decide(const MockBehavior& m, std::string_view prompt) {
    const std::string a = option_text(prompt, pf::kOptionAField);
    const std::string b = option_text(prompt, pf::kOptionBField);
    std::optional<char> coop_letter;
    if (contains(a, m.cooperative_marker)) {
        coop_letter = 'A';
    } else if (contains(b, m.cooperative_marker)) {
        coop_letter = 'B';
    }

    const std::uint64_t h = splitmix64(m.seed ^ fnv1a64(prompt));
    char letter = 'A';
    bool cooperate = true;
    if (m.always_letter) {
        letter = *m.always_letter;
        cooperate = coop_letter && *coop_letter == letter;
    } else {
        double logit = m.bias;
        for (const auto& f : m.features) {
            if (contains(prompt, f.contains)) {
                logit += f.weight;
            }
        }
        if (coop_letter && *coop_letter == 'A') {
            logit += m.order_weight;
        }
        cooperate = m.stochastic ? unit_interval(h) < 1.0 / (1.0 + std::exp(-logit)) : logit >= 0.0;
        if (coop_letter) {
            letter = cooperate ? *coop_letter : (*coop_letter == 'A' ? 'B' : 'A');
        }
    }

    std::string reply = cooperate
                            ? "Weighing both sides, building trust with the other party serves everyone best here."
                            : "Weighing both sides, protecting my own position is the safer course here.";
    if (unit_interval(splitmix64(h)) < m.game_theory_rate) {
        reply += " This situation is a classic prisoner's dilemma.";
    }
    reply += "\nDecision: ";
    reply += letter;
    return reply;
}

std::string policy_respond(const MockBehavior& m, std::string_view prompt) {
    if (contains(prompt, pf::kJudgeQuestion)) {
        return judge(prompt);
    }
    if (contains(prompt, pf::kGeneratorPreamble) && contains(prompt, pf::kCountField)) {
        return storyteller(m, prompt);
    }
    if (contains(prompt, pf::kSummaryInstruction)) {
        return summarizer(prompt);
    }
    if (contains(prompt, pf::kOptionsHeader)) {
        return decide(m, prompt);
    }
    return m.fixed_text.empty() ? "I am not sure what is being asked." : m.fixed_text;
}

class MockTransport final : public Transport {
public:
    std::string send(const ProviderConfig& c, std::string_view prompt, int attempt) override {
        if (!c.mock) {
            throw ConfigError("mock transport used with provider " + c.model_id + " that has no mock behavior");
        }
        const MockBehavior& m = *c.mock;
        if (m.latency_ms > 0) {
            if (m.latency_ms > c.timeout_seconds * 1000.0) {
                throw AttemptFailure("mock request timed out", 408);
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(m.latency_ms));
        }
        if (std::find(m.failure_schedule.begin(), m.failure_schedule.end(), attempt) != m.failure_schedule.end()) {
            throw AttemptFailure("scheduled mock failure on attempt " + std::to_string(attempt), 503);
        }
        for (const auto& needle : m.fail_when_contains) {
            if (contains(prompt, needle)) {
                throw AttemptFailure("mock refuses prompts containing '" + needle + "'", 500);
            }
        }
        for (const auto& rule : m.rules) {
            if (contains(prompt, rule.contains)) {
                return rule.response;
            }
        }
        switch (m.mode) {
            case MockMode::FixedText:
                return m.fixed_text;
            case MockMode::ScriptedSequence: {
                std::lock_guard lock(mutex_);
                std::size_t& pos = script_pos_[c.model_id];
                if (pos >= m.script.size()) {
                    throw ConfigError("scripted mock " + c.model_id + " exhausted its script after " +
                                      std::to_string(m.script.size()) + " responses");
                }
                return m.script[pos++];
            }
            case MockMode::Policy:
                return policy_respond(m, prompt);
        }
        return {};
    }

private:
    std::mutex mutex_;
    std::map<std::string, std::size_t> script_pos_;
};

}  // namespace

std::shared_ptr<Transport> make_mock_transport() { return std::make_shared<MockTransport>(); }

}  // namespace framebench::gateway
