#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace framebench {

// Canonical level order below is load-bearing: feature encoding, grid
// enumeration and report row order all follow it.

enum class Topic {
    UsPolitics2020,
    Business,
    UsBusiness,
    GlobalPolitics20thC,
    GlobalPolitics21stC,
    GlobalPolitics5thC,
    InternationalBusiness,
    Politics,
    SocialEvents,
    SportingEvents,
};

enum class WorldType { RealWorld, ImaginaryWorld };

enum class ActorType { Allies, Enemies, Neutral };

inline constexpr std::array kAllTopics = {
    Topic::UsPolitics2020,      Topic::Business,           Topic::UsBusiness,
    Topic::GlobalPolitics20thC, Topic::GlobalPolitics21stC, Topic::GlobalPolitics5thC,
    Topic::InternationalBusiness, Topic::Politics,         Topic::SocialEvents,
    Topic::SportingEvents,
};
inline constexpr std::array kAllWorlds = {WorldType::RealWorld, WorldType::ImaginaryWorld};
inline constexpr std::array kAllActors = {ActorType::Allies, ActorType::Enemies, ActorType::Neutral};

[[nodiscard]] std::string_view to_string(Topic t);
[[nodiscard]] std::string_view to_string(WorldType w);
[[nodiscard]] std::string_view to_string(ActorType a);

/// Throw SchemaError on unknown names.
[[nodiscard]] Topic topic_from_string(std::string_view s);
[[nodiscard]] WorldType world_from_string(std::string_view s);
[[nodiscard]] ActorType actor_from_string(std::string_view s);

/// Phrase used inside generation prompts ("global politics in the 5th century").
[[nodiscard]] std::string_view describe(Topic t);

struct ContextCell {
    Topic topic = Topic::UsPolitics2020;
    WorldType world = WorldType::RealWorld;
    ActorType actor = ActorType::Allies;

    friend auto operator<=>(const ContextCell&, const ContextCell&) = default;
};

/// "topic/world/actor"
[[nodiscard]] std::string cell_key(const ContextCell& cell);

/// Cross product in canonical order (topics outermost, actors innermost).
[[nodiscard]] std::vector<ContextCell> make_grid(const std::vector<Topic>& topics, const std::vector<WorldType>& worlds,
                                                 const std::vector<ActorType>& actors);
[[nodiscard]] std::vector<ContextCell> full_grid();

}  // namespace framebench
