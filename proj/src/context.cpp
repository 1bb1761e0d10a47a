#include "framebench/context.hpp"

#include "framebench/error.hpp"

namespace framebench {

std::string_view to_string(Topic t) {
    switch (t) {
        case Topic::UsPolitics2020: return "us_politics_2020";
        case Topic::Business: return "business";
        case Topic::UsBusiness: return "us_business";
        case Topic::GlobalPolitics20thC: return "global_politics_20th_c";
        case Topic::GlobalPolitics21stC: return "global_politics_21st_c";
        case Topic::GlobalPolitics5thC: return "global_politics_5th_c";
        case Topic::InternationalBusiness: return "international_business";
        case Topic::Politics: return "politics";
        case Topic::SocialEvents: return "social_events";
        case Topic::SportingEvents: return "sporting_events";
    }
    return "?";
}

std::string_view to_string(WorldType w) { return w == WorldType::RealWorld ? "real_world" : "imaginary_world"; }

std::string_view to_string(ActorType a) {
    switch (a) {
        case ActorType::Allies: return "allies";
        case ActorType::Enemies: return "enemies";
        case ActorType::Neutral: return "neutral";
    }
    return "?";
}

Topic topic_from_string(std::string_view s) {
    for (Topic t : kAllTopics) {
        if (to_string(t) == s) return t;
    }
    throw SchemaError("unknown topic '" + std::string(s) + "'");
}

WorldType world_from_string(std::string_view s) {
    for (WorldType w : kAllWorlds) {
        if (to_string(w) == s) return w;
    }
    throw SchemaError("unknown world type '" + std::string(s) + "'");
}

ActorType actor_from_string(std::string_view s) {
    for (ActorType a : kAllActors) {
        if (to_string(a) == s) return a;
    }
    throw SchemaError("unknown actor type '" + std::string(s) + "'");
}

std::string_view describe(Topic t) {
    switch (t) {
        case Topic::UsPolitics2020: return "US politics in 2020";
        case Topic::Business: return "business";
        case Topic::UsBusiness: return "US business";
        case Topic::GlobalPolitics20thC: return "global politics in the 20th century";
        case Topic::GlobalPolitics21stC: return "global politics in the 21st century";
        case Topic::GlobalPolitics5thC: return "global politics in the 5th century";
        case Topic::InternationalBusiness: return "international business";
        case Topic::Politics: return "politics";
        case Topic::SocialEvents: return "social or casual events";
        case Topic::SportingEvents: return "sporting events";
    }
    return "?";
}

std::string cell_key(const ContextCell& cell) {
    std::string k(to_string(cell.topic));
    k += '/';
    k += to_string(cell.world);
    k += '/';
    k += to_string(cell.actor);
    return k;
}

std::vector<ContextCell> make_grid(const std::vector<Topic>& topics, const std::vector<WorldType>& worlds,
                                   const std::vector<ActorType>& actors) {
    std::vector<ContextCell> out;
    out.reserve(topics.size() * worlds.size() * actors.size());
    for (Topic t : topics) {
        for (WorldType w : worlds) {
            for (ActorType a : actors) {
                out.push_back({t, w, a});
            }
        }
    }
    return out;
}

std::vector<ContextCell> full_grid() {
    return make_grid({kAllTopics.begin(), kAllTopics.end()}, {kAllWorlds.begin(), kAllWorlds.end()},
                     {kAllActors.begin(), kAllActors.end()});
}

}  // namespace framebench
