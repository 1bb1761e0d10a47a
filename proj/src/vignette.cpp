#include "framebench/vignette.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "framebench/parallel.hpp"
#include "framebench/prompt_format.hpp"

namespace framebench::vignette {

namespace pf = prompt_format;

// --- helpers --------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

/// Strip markdown emphasis/heading characters that models like to add.
std::string strip_decoration(const std::string& line) {
    std::size_t b = 0;
    while (b < line.size() && (line[b] == '*' || line[b] == '#' || line[b] == ' ' || line[b] == '_')) {
        ++b;
    }
    std::string out = line.substr(b);
    while (!out.empty() && (out.back() == '*' || out.back() == '_' || out.back() == ' ' || out.back() == '\r')) {
        out.pop_back();
    }
    return out;
}

std::optional<std::string> extract_protagonist(const std::string& text) {
    const auto tail = text.rfind(pf::kClosingTail);
    if (tail == std::string::npos) {
        return std::nullopt;
    }
    const auto lead = text.rfind(pf::kClosingLead, tail);
    if (lead == std::string::npos) {
        return std::nullopt;
    }
    std::string name = trim(text.substr(lead + pf::kClosingLead.size(), tail - lead - pf::kClosingLead.size()));
    if (name.empty() || name.find('\n') != std::string::npos) {
        return std::nullopt;
    }
    return name;
}

const std::regex& payoff_tuple_re() {
    static const std::regex re(R"(\(\s*-?\d+(\.\d+)?\s*,\s*-?\d+(\.\d+)?\s*\))");
    return re;
}

const std::regex& payoff_phrase_re() {
    static const std::regex re(
        R"(\b(payoffs?|happiness|utility|utilities|satisfaction|points?)(\s+(level|score|value))?\s+(of\s+|is\s+|=\s*)?-?\d)",
        std::regex::icase);
    return re;
}

const std::regex& payoff_matrix_re() {
    static const std::regex re(R"(payoff\s+matrix)", std::regex::icase);
    return re;
}

std::string ordinal_word(const game::Rational& value, const std::vector<game::Rational>& distinct_desc) {
    const auto it = std::find(distinct_desc.begin(), distinct_desc.end(), value);
    const auto rank = static_cast<std::size_t>(it - distinct_desc.begin());
    if (rank == 0) return "the highest";
    if (rank + 1 == distinct_desc.size()) return "the lowest";
    return rank == 1 ? "a moderate" : "a low";
}

}  // namespace

// --- core set -------------------------------------------------------------

CoreSet::CoreSet(std::size_t token_budget) : token_budget_(token_budget) {
    if (token_budget_ == 0) {
        throw ConfigError("core set token budget must be positive");
    }
}

void CoreSet::add(const std::string& summary) {
    std::string line = flatten_line(summary);
    tokens_ += estimate_tokens(line);
    summaries_.push_back(std::move(line));
    while (tokens_ > token_budget_ && !summaries_.empty()) {
        tokens_ -= estimate_tokens(summaries_.front());
        summaries_.pop_front();
    }
}

std::string normalize_summary(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::string flatten_line(const std::string& s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(c);
    }
    return out;
}

// --- validation -----------------------------------------------------------

std::optional<std::string> validate(const Vignette& v, const ValidationOptions& opts) {
    const std::string text = trim(v.text);
    if (text.empty()) {
        return "empty text";
    }
    if (opts.reject_numeric_payoffs &&
        (std::regex_search(text, payoff_matrix_re()) || std::regex_search(text, payoff_tuple_re()) ||
         std::regex_search(text, payoff_phrase_re()))) {
        return "explicit payoff matrix";
    }
    if (text.find("Decision A") == std::string::npos || text.find("Decision B") == std::string::npos) {
        return "missing decision labels";
    }
    static const std::regex extra_label(R"(Decision [C-Z]\b)");
    if (std::regex_search(text, extra_label)) {
        return "more than two decision labels";
    }
    if (text.size() < pf::kClosingTail.size() ||
        text.compare(text.size() - pf::kClosingTail.size(), pf::kClosingTail.size(), pf::kClosingTail) != 0) {
        return "missing closing question";
    }
    const auto protagonist = extract_protagonist(text);
    if (!protagonist || v.protagonist.empty() || *protagonist != v.protagonist) {
        return "protagonist does not match closing question";
    }
    if (v.summary.find('\n') != std::string::npos) {
        return "multi-line summary";
    }
    if (v.cooperative_label != 'A' && v.cooperative_label != 'B') {
        return "cooperative label must be A or B";
    }
    return std::nullopt;
}

// --- prompts --------------------------------------------------------------

std::string build_generation_prompt(const ContextCell& cell, const game::PayoffMatrix& payoff, int batch_size,
                                    const CoreSet& core_set) {
    if (payoff.rows() != 2 || payoff.cols() != 2) {
        throw DomainError("vignettes encode exactly two decisions per actor; payoff must be 2x2");
    }
    if (batch_size < 1) {
        throw DomainError("batch size must be at least 1");
    }

    std::vector<game::Rational> values;
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            values.push_back(payoff.cell(r, c).p1);
            values.push_back(payoff.cell(r, c).p2);
        }
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    const auto& s1 = payoff.strategies(game::Player::One);
    const char* letters = "AB";
    const bool real = cell.world == WorldType::RealWorld;

    std::ostringstream p;
    p << pf::kGeneratorPreamble << " writing short narrative vignettes for a study of strategic decision-making.\n\n";
    p << pf::kTopicField << describe(cell.topic) << "\n";
    p << pf::kWorldField << (real ? "the real world" : "an imaginary world") << "\n";
    p << pf::kActorField
      << (cell.actor == ActorType::Allies    ? "allies"
          : cell.actor == ActorType::Enemies ? "enemies"
                                             : "neutral acquaintances")
      << "\n";
    p << pf::kCountField << batch_size << "\n\n";

    p << "Each vignette describes two actors who must each choose between two actions, Decision A and Decision B, "
         "without knowing what the other will choose. Decision A is the "
      << s1[0].label << " action and Decision B is the " << s1[1].label << " action.\n\n";
    p << "Outcomes for each actor, on a happiness scale, depend on both decisions:\n";
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            const auto& cellv = payoff.cell(r, c);
            p << "- If the first actor chooses Decision " << letters[r] << " and the second actor chooses Decision "
              << letters[c] << ": the first actor receives " << ordinal_word(cellv.p1, values) << " outcome (happiness "
              << cellv.p1.str() << ") and the second actor receives " << ordinal_word(cellv.p2, values)
              << " outcome (happiness " << cellv.p2.str() << ").\n";
        }
    }

    p << "\nRules for every vignette:\n";
    p << "- Do not state the payoff matrix or any of the happiness numbers in the story. Describe outcomes only in "
         "words such as \"moderate\", \"low\" or \"highest\".\n";
    p << "- Make each actor's outcome dependent not only on their own decision, but also on the decision of the "
         "other actor, and describe what happens under every combination of decisions.\n";
    p << "- Call the two actions \"Decision A\" and \"Decision B\" in the story.\n";
    if (real) {
        p << "- All characters must be confirmed current or historical characters who could plausibly have "
             "interacted in the manner described in the story.\n";
    } else {
        p << "- Set the story in an imaginary world with invented characters, places and institutions.\n";
    }
    switch (cell.actor) {
        case ActorType::Allies:
            p << "- The two actors are allies.\n";
            break;
        case ActorType::Enemies:
            p << "- The two actors are enemies.\n";
            break;
        case ActorType::Neutral:
            p << "- The two actors are neutral acquaintances with no particular loyalty or hostility.\n";
            break;
    }
    p << "- End every story with the sentence \"" << pf::kClosingLead << "{protagonist}" << pf::kClosingTail
      << "\", where {protagonist} is the first-named decision-maker.\n";

    if (!core_set.empty()) {
        p << "\n" << pf::kCoreSetHeader << "\n";
        for (const auto& s : core_set.summaries()) {
            p << "- " << s << "\n";
        }
        p << "Write stories that are meaningfully different from those in this set.\n";
    }

    p << "\nOutput format: write exactly " << batch_size << (batch_size == 1 ? " vignette" : " vignettes")
      << ". Format each one as\n\n";
    p << pf::kVignetteHeader << "<number>\n";
    p << pf::kOptionAField << "<one-line description of Decision A>\n";
    p << pf::kOptionBField << "<one-line description of Decision B>\n";
    p << pf::kStoryField << "<the story>\n";
    p << pf::kVignetteSentinel << "\n";
    return p.str();
}

// --- batch parsing --------------------------------------------------------

namespace {

std::vector<std::string> split_blocks(const std::string& raw) {
    std::vector<std::string> blocks;
    std::istringstream in(raw);
    std::string line;
    std::string current;
    bool saw_sentinel = false;
    while (std::getline(in, line)) {
        if (trim(strip_decoration(line)) == pf::kVignetteSentinel || trim(line) == pf::kVignetteSentinel) {
            saw_sentinel = true;
            blocks.push_back(std::move(current));
            current.clear();
            continue;
        }
        current += line;
        current += '\n';
    }
    if (saw_sentinel) {
        blocks.push_back(std::move(current));
        return blocks;
    }

    // No sentinel: every story ends at its closing question.
    blocks.clear();
    static const std::regex closing("You are [^\\n]*? in this scenario\\. What decision will you make\\?");
    std::size_t start = 0;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), closing); it != std::sregex_iterator(); ++it) {
        const std::size_t end = static_cast<std::size_t>(it->position() + it->length());
        blocks.push_back(raw.substr(start, end - start));
        start = end;
    }
    blocks.push_back(raw.substr(start));
    return blocks;
}

Vignette parse_block(const std::string& block, const ContextCell& cell) {
    Vignette v;
    v.cell = cell;
    std::istringstream in(block);
    std::string line;
    std::string story;
    bool in_story = false;
    while (std::getline(in, line)) {
        const std::string clean = strip_decoration(line);
        if (!in_story) {
            if (starts_with(clean, pf::kVignetteHeader) && clean.size() < 20) {
                continue;
            }
            if (starts_with(clean, pf::kOptionAField)) {
                v.option_a = trim(clean.substr(pf::kOptionAField.size()));
                continue;
            }
            if (starts_with(clean, pf::kOptionBField)) {
                v.option_b = trim(clean.substr(pf::kOptionBField.size()));
                continue;
            }
            if (starts_with(clean, pf::kStoryField)) {
                in_story = true;
                story += clean.substr(pf::kStoryField.size());
                story += '\n';
                continue;
            }
        }
        story += line;
        story += '\n';
    }
    v.text = trim(story);
    if (auto p = extract_protagonist(v.text)) {
        v.protagonist = *p;
    }
    if (v.option_a.empty()) {
        v.option_a = "the action the story calls Decision A";
    }
    if (v.option_b.empty()) {
        v.option_b = "the action the story calls Decision B";
    }
    return v;
}

}  // namespace

ParsedBatch parse_generated_batch(const std::string& raw, const ContextCell& cell, const ValidationOptions& opts) {
    ParsedBatch out;
    int position = 0;
    for (const auto& block : split_blocks(raw)) {
        if (trim(block).empty()) {
            continue;
        }
        ++position;
        Vignette v = parse_block(block, cell);
        if (v.text.empty()) {
            continue;
        }
        if (auto reason = validate(v, opts)) {
            out.rejects.push_back({position, *reason, v.text.substr(0, 120)});
            continue;
        }
        out.vignettes.push_back(std::move(v));
    }
    if (out.vignettes.empty()) {
        std::string why = out.rejects.empty() ? "no vignette blocks found" : out.rejects.front().reason;
        throw GenerationError("generator response for " + cell_key(cell) + " contained no usable vignette (" + why +
                              ")");
    }
    return out;
}

// --- summaries ------------------------------------------------------------

std::string build_summary_prompt(const std::vector<Vignette>& batch) {
    std::ostringstream p;
    p << pf::kSummaryInstruction
      << " below, with a particular emphasis on its characters and plot line. Answer with exactly " << batch.size()
      << (batch.size() == 1 ? " line" : " lines") << "; line i must start with \"i. \" and summarize story i.\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
        p << "\n" << pf::kSummaryStoryHeader << (i + 1) << ":\n" << batch[i].text << "\n";
    }
    return p.str();
}

std::vector<std::optional<std::string>> parse_summaries(const std::string& raw, std::size_t count) {
    std::vector<std::optional<std::string>> out(count);
    static const std::regex numbered(R"(^\s*\**\s*(\d+)\s*[.):]\s*(.*)$)");
    std::istringstream in(raw);
    std::string line;
    std::optional<std::size_t> current;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, numbered)) {
            const auto idx = std::stoul(m[1].str());
            if (idx >= 1 && idx <= count) {
                current = idx - 1;
                out[*current] = m[2].str();
                continue;
            }
            current.reset();
            continue;
        }
        // Continuation of a wrapped summary gets flattened into it.
        if (current && !trim(line).empty()) {
            *out[*current] += " " + trim(line);
        }
    }
    for (auto& s : out) {
        if (s) {
            *s = flatten_line(*s);
            if (s->empty()) {
                s.reset();
            }
        }
    }
    return out;
}

std::vector<std::string> summarize_batch(const std::vector<Vignette>& batch, const gateway::ProviderConfig& provider,
                                         gateway::Gateway& gw, const gateway::RetryPolicy& retry) {
    if (batch.empty()) {
        throw DomainError("summarize_batch needs at least one vignette");
    }
    const auto ex = gw.complete(build_summary_prompt(batch), provider, retry);
    const auto parsed = parse_summaries(ex.response_text, batch.size());
    std::vector<std::string> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (parsed[i]) {
            out.push_back(*parsed[i]);
            continue;
        }
        const auto& text = batch[i].text;
        const auto dot = text.find(". ");
        std::string first = text.substr(0, dot == std::string::npos ? std::min<std::size_t>(text.size(), 160) : dot + 1);
        out.push_back(flatten_line(batch[i].protagonist + ": " + first));
    }
    return out;
}

// --- generation -----------------------------------------------------------

void GenerationPlan::validate() const {
    if (per_cell_count < 1) {
        throw ConfigError("per-cell vignette count must be positive");
    }
    if (batch_size < 1 || batch_size > per_cell_count) {
        throw ConfigError("batch size must lie in [1, per-cell count]");
    }
    if (payoff.rows() != 2 || payoff.cols() != 2) {
        throw ConfigError("generation needs a 2x2 payoff matrix");
    }
    if (require_pd && !(game::is_symmetric(payoff) && game::is_prisoners_dilemma(payoff))) {
        throw ConfigError("payoff matrix is not a prisoner's dilemma (T > R > P > S)");
    }
    generator.validate();
    retry.validate();
}

int GenerationPlan::batch_budget() const {
    if (max_batches > 0) {
        return max_batches;
    }
    return (3 * per_cell_count + batch_size - 1) / batch_size;
}

std::string make_vignette_id(const ContextCell& cell, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", index);
    return std::string(to_string(cell.topic)) + "." + std::string(to_string(cell.world)) + "." +
           std::string(to_string(cell.actor)) + "." + buf;
}

std::vector<Vignette> generate_cell(const ContextCell& cell, const GenerationPlan& plan, gateway::Gateway& gw,
                                    const std::vector<Vignette>& existing, const VignetteSink& sink,
                                    const BatchObserver& observer) {
    plan.validate();
    const auto n = static_cast<std::size_t>(plan.per_cell_count);

    std::vector<Vignette> accepted;
    std::set<std::string> seen;
    std::set<std::string> ids;
    CoreSet core(plan.core_set_token_budget);
    int batch_index = 0;
    for (const auto& v : existing) {
        if (v.cell != cell) {
            throw DomainError("vignette " + v.vignette_id + " does not belong to cell " + cell_key(cell));
        }
        accepted.push_back(v);
        seen.insert(normalize_summary(v.summary));
        ids.insert(v.vignette_id);
        core.add(v.summary);
        batch_index = std::max(batch_index, v.batch_index + 1);
    }
    if (accepted.size() >= n) {
        return accepted;
    }

    gateway::ProviderConfig generator = plan.generator;
    if (!generator.seed) {
        generator.seed = plan.seed;
    }

    const int budget = plan.batch_budget();
    for (int run = 0; run < budget && accepted.size() < n; ++run, ++batch_index) {
        const auto want = static_cast<int>(std::min<std::size_t>(plan.batch_size, n - accepted.size()));
        BatchEvent event;
        event.cell = cell;
        event.batch_index = batch_index;
        event.prompt = build_generation_prompt(cell, plan.payoff, want, core);
        try {
            const auto ex = gw.complete(event.prompt, generator, plan.retry);
            auto parsed = parse_generated_batch(ex.response_text, cell, plan.validation);
            event.parsed = static_cast<int>(parsed.vignettes.size());
            event.rejected = static_cast<int>(parsed.rejects.size());
            if (parsed.vignettes.size() > static_cast<std::size_t>(want)) {
                parsed.vignettes.resize(static_cast<std::size_t>(want));
            }
            const auto summaries = summarize_batch(parsed.vignettes, generator, gw, plan.retry);

            std::vector<Vignette> fresh;
            for (std::size_t i = 0; i < parsed.vignettes.size(); ++i) {
                Vignette v = std::move(parsed.vignettes[i]);
                v.summary = summaries[i];
                const std::string key = normalize_summary(v.summary);
                if (!seen.insert(key).second) {
                    ++event.duplicates;
                    continue;
                }
                v.batch_index = batch_index;
                v.generator_model_id = ex.model_id;
                int index = static_cast<int>(accepted.size() + fresh.size());
                while (ids.count(make_vignette_id(cell, index)) != 0) {
                    ++index;
                }
                v.vignette_id = make_vignette_id(cell, index);
                ids.insert(v.vignette_id);
                if (auto reason = validate(v, plan.validation)) {
                    ++event.rejected;
                    seen.erase(key);
                    continue;
                }
                fresh.push_back(std::move(v));
            }
            event.accepted = static_cast<int>(fresh.size());
            for (const auto& v : fresh) {
                core.add(v.summary);
            }
            if (sink && !fresh.empty()) {
                sink(fresh);
            }
            accepted.insert(accepted.end(), std::make_move_iterator(fresh.begin()),
                            std::make_move_iterator(fresh.end()));
        } catch (const TransportError& e) {
            event.error = e.what();
        } catch (const GenerationError& e) {
            event.error = e.what();
        }
        if (observer) {
            observer(event);
        }
    }

    if (accepted.size() < n) {
        throw PartialGenerationError("cell " + cell_key(cell) + " reached " + std::to_string(accepted.size()) + " of " +
                                         std::to_string(n) + " vignettes before the batch budget of " +
                                         std::to_string(budget) + " ran out",
                                     std::move(accepted));
    }
    return accepted;
}

bool GridReport::complete() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellStatus& c) { return c.complete; });
}

int GridReport::total() const {
    int t = 0;
    for (const auto& c : cells) {
        t += c.count;
    }
    return t;
}

GridReport generate_grid(const GenerationPlan& plan, gateway::Gateway& gw,
                         const std::map<std::string, std::vector<Vignette>>& existing, const VignetteSink& sink,
                         const BatchObserver& observer) {
    plan.validate();
    GridReport report;
    report.generator_model_id = plan.generator.model_id;
    report.cells.resize(plan.cells.size());

    std::mutex sink_mutex;
    std::mutex observer_mutex;
    bounded_for_each(plan.cells.size(), plan.max_parallel_cells, [&](std::size_t i) {
        const ContextCell& cell = plan.cells[i];
        CellStatus& status = report.cells[i];
        status.cell = cell;
        const auto it = existing.find(cell_key(cell));
        const std::vector<Vignette> prior = it == existing.end() ? std::vector<Vignette>{} : it->second;
        status.count = static_cast<int>(prior.size());
        if (status.count >= plan.per_cell_count) {
            status.complete = true;
            status.skipped = true;
            return;
        }
        auto counting_sink = [&](const std::vector<Vignette>& batch) {
            std::lock_guard lock(sink_mutex);
            status.count += static_cast<int>(batch.size());
            if (sink) {
                sink(batch);
            }
        };
        auto locked_observer = [&](const BatchEvent& e) {
            if (observer) {
                std::lock_guard lock(observer_mutex);
                observer(e);
            }
        };
        try {
            const auto all = generate_cell(cell, plan, gw, prior, counting_sink, locked_observer);
            status.count = static_cast<int>(all.size());
            status.complete = true;
        } catch (const std::exception& e) {
            status.error = e.what();
        }
    });
    return report;
}

// --- serialization --------------------------------------------------------

nlohmann::json to_json(const Vignette& v) {
    return {{"vignette_id", v.vignette_id},
            {"topic", to_string(v.cell.topic)},
            {"world_type", to_string(v.cell.world)},
            {"actor_type", to_string(v.cell.actor)},
            {"text", v.text},
            {"protagonist", v.protagonist},
            {"summary", v.summary},
            {"batch_index", v.batch_index},
            {"generator_model_id", v.generator_model_id},
            {"option_a", v.option_a},
            {"option_b", v.option_b},
            {"cooperative_label", std::string(1, v.cooperative_label)}};
}

Vignette vignette_from_json(const nlohmann::json& j) {
    try {
        Vignette v;
        v.vignette_id = j.at("vignette_id").get<std::string>();
        v.cell.topic = topic_from_string(j.at("topic").get<std::string>());
        v.cell.world = world_from_string(j.at("world_type").get<std::string>());
        v.cell.actor = actor_from_string(j.at("actor_type").get<std::string>());
        v.text = j.at("text").get<std::string>();
        v.protagonist = j.at("protagonist").get<std::string>();
        v.summary = j.value("summary", std::string());
        v.batch_index = j.value("batch_index", 0);
        v.generator_model_id = j.value("generator_model_id", std::string());
        v.option_a = j.value("option_a", std::string("the action the story calls Decision A"));
        v.option_b = j.value("option_b", std::string("the action the story calls Decision B"));
        const auto label = j.value("cooperative_label", std::string("A"));
        v.cooperative_label = label.empty() ? 'A' : label[0];
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed vignette record: ") + e.what());
    }
}

}  // namespace framebench::vignette
