#include "lookalike/customer_data.hpp"

#include "lookalike/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace lookalike {

using nlohmann::json;

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::Transaction: return "transaction";
    case Channel::Visit: return "visit";
    case Channel::Engagement: return "engagement";
  }
  return "transaction";
}

std::optional<Channel> channel_from_string(std::string_view name) {
  if (name == "transaction") return Channel::Transaction;
  if (name == "visit") return Channel::Visit;
  if (name == "engagement") return Channel::Engagement;
  return std::nullopt;
}

namespace {

[[noreturn]] void line_error(std::size_t line_no, const std::string& detail) {
  throw DataError("line " + std::to_string(line_no) + ": " + detail);
}

CustomerRecord parse_record(const json& j, std::size_t line_no) {
  CustomerRecord rec;
  if (!j.is_object()) line_error(line_no, "expected a JSON object");
  if (!j.contains("customer_id")) line_error(line_no, "missing field 'customer_id'");
  if (!j["customer_id"].is_number_unsigned()) {
    line_error(line_no, "'customer_id' must be a non-negative integer");
  }
  rec.customer_id = j["customer_id"].get<uint64_t>();

  if (!j.contains("events") || !j["events"].is_array()) {
    line_error(line_no, "missing or non-array field 'events'");
  }
  for (const auto& e : j["events"]) {
    if (!e.is_array() || e.size() != 4) {
      line_error(line_no, "event must be [day, channel, category, magnitude]");
    }
    Event ev;
    if (!e[0].is_number_integer()) line_error(line_no, "event day must be an integer");
    ev.day = e[0].get<int32_t>();
    if (!e[1].is_string()) line_error(line_no, "event channel must be a string");
    auto ch = channel_from_string(e[1].get<std::string>());
    if (!ch) line_error(line_no, "unknown channel '" + e[1].get<std::string>() + "'");
    ev.channel = *ch;
    if (!e[2].is_number_unsigned()) line_error(line_no, "event category must be a non-negative integer");
    ev.category = e[2].get<uint32_t>();
    if (!e[3].is_number()) line_error(line_no, "event magnitude must be a number");
    ev.magnitude = e[3].get<double>();
    if (!(ev.magnitude > 0.0)) line_error(line_no, "event magnitude must be positive");
    rec.events.push_back(ev);
  }

  if (!j.contains("demographics") || !j["demographics"].is_object()) {
    line_error(line_no, "missing or non-object field 'demographics'");
  }
  for (const auto& [key, value] : j["demographics"].items()) {
    if (!value.is_string()) line_error(line_no, "demographic '" + key + "' must be a string");
    rec.demographics[key] = value.get<std::string>();
  }

  if (!j.contains("dense_stats") || !j["dense_stats"].is_object()) {
    line_error(line_no, "missing or non-object field 'dense_stats'");
  }
  for (const auto& [key, value] : j["dense_stats"].items()) {
    if (!value.is_number()) line_error(line_no, "dense stat '" + key + "' must be a number");
    rec.dense_stats[key] = value.get<double>();
  }

  if (!j.contains("location_text") || !j["location_text"].is_string()) {
    line_error(line_no, "missing or non-string field 'location_text'");
  }
  rec.location_text = j["location_text"].get<std::string>();
  return rec;
}

json record_to_json(const CustomerRecord& rec) {
  json j;
  j["customer_id"] = rec.customer_id;
  json events = json::array();
  for (const auto& e : rec.events) {
    events.push_back(json::array(
        {e.day, std::string(to_string(e.channel)), e.category, e.magnitude}));
  }
  j["events"] = std::move(events);
  j["demographics"] = json(rec.demographics);
  j["dense_stats"] = json(rec.dense_stats);
  j["location_text"] = rec.location_text;
  return j;
}

} // namespace

std::vector<CustomerRecord> load_customers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::vector<CustomerRecord> records;
  std::unordered_set<uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) line_error(line_no, "empty line");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    CustomerRecord rec = parse_record(j, line_no);
    if (!seen.insert(rec.customer_id).second) {
      throw DataError("duplicate customer_id " + std::to_string(rec.customer_id) +
                      " on line " + std::to_string(line_no));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_customers(std::span<const CustomerRecord> records,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  for (const auto& rec : records) {
    out << record_to_json(rec).dump() << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

// Synthetic universe knobs. Archetypes get peaked category propensities
// (small Dirichlet alpha), a mild per-customer jitter, demographic value
// preferences and, when informative, a private city vocabulary.
constexpr double kPropensityAlpha = 0.2;
constexpr double kJitterAlpha = 0.3;
constexpr double kJitterWeight = 0.1;
constexpr double kDemographicPreference = 0.55;
constexpr double kChannelShares[3] = {0.5, 0.3, 0.2};

const std::vector<std::string>& city_pool() {
  static const std::vector<std::string> pool = [] {
    const char* prefixes[] = {"ash",  "bell", "crest", "dun",   "elm",  "fair",
                              "glen", "haven", "iron",  "june",  "king", "lark",
                              "maple", "north", "oak",  "pine",  "quail", "river",
                              "stone", "thorn", "union", "vale",  "wood", "york"};
    const char* suffixes[] = {"field", "ford", "ton", "dale", "burg", "view", "port", "wick"};
    std::vector<std::string> out;
    for (const char* p : prefixes) {
      for (const char* s : suffixes) out.push_back(std::string(p) + s);
    }
    return out;
  }();
  return pool;
}

const std::vector<std::string>& state_pool() {
  static const std::vector<std::string> pool = {
      "avalonia", "boreala",  "cascadia", "deseret",  "eastmark", "floria",
      "gulfland", "highmark", "ironside", "jasperia", "keystone", "lakemont"};
  return pool;
}

const std::vector<std::string>& street_pool() {
  static const std::vector<std::string> pool = {
      "main",   "oakwood", "cedar",  "willow", "summit", "prospect", "laurel",
      "juniper", "magnolia", "chestnut", "spruce", "harrison", "monroe", "grant",
      "sheridan", "colonial", "meadow", "orchard", "garden", "terrace"};
  return pool;
}

struct Archetype {
  std::vector<double> propensity; // over categories, sums to 1
  std::size_t gender = 0;
  std::size_t education = 0;
  std::size_t occupation = 0;
  std::vector<std::string> cities;
  std::string state;
  double basket_scale = 50.0;
};

std::vector<double> draw_dirichlet(std::mt19937_64& rng, std::size_t n, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> out(n);
  double total = 0.0;
  for (double& x : out) {
    x = gamma(rng);
    total += x;
  }
  if (total <= 0.0) {
    // Degenerate gamma draws; fall back to uniform mass.
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n));
    return out;
  }
  for (double& x : out) x /= total;
  return out;
}

std::size_t draw_categorical(std::mt19937_64& rng, std::span<const double> weights) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

} // namespace

std::vector<CustomerRecord> generate_synthetic(const SynthConfig& config) {
  if (config.n_customers == 0) return {};
  if (config.n_categories == 0) throw std::invalid_argument("n_categories must be positive");
  if (config.n_archetypes == 0) throw std::invalid_argument("n_archetypes must be >= 1");
  if (config.n_archetypes > config.n_customers) {
    throw std::invalid_argument("n_archetypes must not exceed n_customers");
  }
  if (config.day_range.start_day >= config.day_range.end_day) {
    throw std::invalid_argument("day_range must satisfy start_day < end_day");
  }
  if (!(config.mean_events > 0.0)) {
    throw std::invalid_argument("mean_events must be positive");
  }

  std::mt19937_64 rng(config.rng_seed);

  const char* genders[] = {"female", "male", "other"};
  const char* educations[] = {"highschool", "college", "graduate", "doctorate"};
  const char* occupations[] = {"retail", "tech", "health", "education",
                               "trades", "finance", "arts", "service"};

  std::vector<Archetype> archetypes(config.n_archetypes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> basket(20.0, 120.0);
  const auto& cities = city_pool();
  const auto& states = state_pool();
  for (uint32_t a = 0; a < config.n_archetypes; ++a) {
    auto& arch = archetypes[a];
    arch.propensity = draw_dirichlet(rng, config.n_categories, kPropensityAlpha);
    arch.gender = a % 3;
    arch.education = a % 4;
    arch.occupation = a % 8;
    for (std::size_t c = 0; c < 3; ++c) {
      arch.cities.push_back(cities[(3 * static_cast<std::size_t>(a) + c) % cities.size()]);
    }
    arch.state = states[a % states.size()];
    arch.basket_scale = basket(rng);
  }

  std::uniform_int_distribution<uint32_t> arch_pick(0, config.n_archetypes - 1);
  std::uniform_int_distribution<int32_t> day_pick(config.day_range.start_day,
                                                  config.day_range.end_day - 1);
  std::uniform_int_distribution<int> street_no(100, 9999);
  std::uniform_int_distribution<int> zip_pick(10000, 99999);
  std::uniform_int_distribution<int> tenure_pick(30, 3000);
  std::poisson_distribution<int> event_count(config.mean_events);
  std::lognormal_distribution<double> basket_noise(0.0, 0.5);

  const char* street_types[] = {"st", "ave", "rd", "blvd", "ln"};

  std::vector<CustomerRecord> records;
  records.reserve(config.n_customers);
  for (uint64_t i = 0; i < config.n_customers; ++i) {
    const uint32_t a = arch_pick(rng);
    const Archetype& arch = archetypes[a];

    CustomerRecord rec;
    rec.customer_id = i;

    // Demographics lean toward the archetype's preferred value.
    auto pick_value = [&](std::size_t preferred, std::size_t n_values) {
      if (unit(rng) < kDemographicPreference) return preferred;
      std::uniform_int_distribution<std::size_t> other(0, n_values - 2);
      std::size_t v = other(rng);
      return v >= preferred ? v + 1 : v;
    };
    rec.demographics["gender"] = genders[pick_value(arch.gender, 3)];
    rec.demographics["education"] = educations[pick_value(arch.education, 4)];
    rec.demographics["occupation"] = occupations[pick_value(arch.occupation, 8)];

    // Location: street part is shared noise, city/state carry the archetype
    // when the universe is configured as location-informative.
    {
      std::uniform_int_distribution<std::size_t> street_name(0, street_pool().size() - 1);
      std::uniform_int_distribution<std::size_t> street_type(0, 4);
      std::string city;
      std::string state;
      if (config.location_informative) {
        std::uniform_int_distribution<std::size_t> city_idx(0, arch.cities.size() - 1);
        city = arch.cities[city_idx(rng)];
        state = arch.state;
      } else {
        std::uniform_int_distribution<std::size_t> city_idx(0, cities.size() - 1);
        std::uniform_int_distribution<std::size_t> state_idx(0, states.size() - 1);
        city = cities[city_idx(rng)];
        state = states[state_idx(rng)];
      }
      std::ostringstream loc;
      loc << street_no(rng) << ' ' << street_pool()[street_name(rng)] << ' '
          << street_types[street_type(rng)] << ' ' << city << ' ' << state << ' '
          << zip_pick(rng);
      rec.location_text = loc.str();
    }

    // Per-customer propensity: archetype mix with a small private jitter.
    std::vector<double> propensity = draw_dirichlet(rng, config.n_categories, kJitterAlpha);
    for (uint32_t c = 0; c < config.n_categories; ++c) {
      propensity[c] = (1.0 - kJitterWeight) * arch.propensity[c] +
                      kJitterWeight * propensity[c];
    }

    const int n_events = event_count(rng);
    rec.events.reserve(static_cast<std::size_t>(std::max(0, n_events)));
    double gmv = 0.0;
    int orders = 0, visits = 0, engagements = 0;
    for (int e = 0; e < n_events; ++e) {
      Event ev;
      const double u = unit(rng);
      if (u < kChannelShares[0]) {
        ev.channel = Channel::Transaction;
      } else if (u < kChannelShares[0] + kChannelShares[1]) {
        ev.channel = Channel::Visit;
      } else {
        ev.channel = Channel::Engagement;
      }
      ev.category = static_cast<uint32_t>(draw_categorical(rng, propensity));
      ev.day = day_pick(rng);
      ev.magnitude = 1.0;
      if (ev.channel == Channel::Transaction) {
        ++orders;
        gmv += arch.basket_scale * basket_noise(rng);
      } else if (ev.channel == Channel::Visit) {
        ++visits;
      } else {
        ++engagements;
      }
      rec.events.push_back(ev);
    }

    rec.dense_stats["order_count"] = static_cast<double>(orders);
    rec.dense_stats["gmv"] = gmv;
    rec.dense_stats["visit_count"] = static_cast<double>(visits);
    rec.dense_stats["engagement_count"] = static_cast<double>(engagements);
    rec.dense_stats["tenure_days"] = static_cast<double>(tenure_pick(rng));

    records.push_back(std::move(rec));
  }
  return records;
}

CategoryActivityVector activity_vector(const CustomerRecord& record,
                                       Channel channel, TimeWindow window,
                                       uint32_t n_categories) {
  CategoryActivityVector out(n_categories, 0.0);
  for (const auto& e : record.events) {
    if (e.channel != channel) continue;
    if (!window.contains(e.day)) continue;
    if (e.category < n_categories) out[e.category] += e.magnitude;
  }
  return out;
}

uint32_t infer_category_count(std::span<const CustomerRecord> records) {
  uint32_t max_seen = 0;
  bool any = false;
  for (const auto& rec : records) {
    for (const auto& e : rec.events) {
      max_seen = std::max(max_seen, e.category);
      any = true;
    }
  }
  return any ? max_seen + 1 : 0;
}

std::pair<DatasetView, DatasetView> time_split(
    std::span<const CustomerRecord> records, TimeWindow train_window,
    TimeWindow eval_window) {
  if (train_window.start_day >= train_window.end_day ||
      eval_window.start_day >= eval_window.end_day) {
    throw std::invalid_argument("time windows must satisfy start_day < end_day");
  }
  if (train_window.end_day > eval_window.start_day) {
    throw std::invalid_argument("train window must end before the eval window starts");
  }
  return {DatasetView{records, train_window}, DatasetView{records, eval_window}};
}

} // namespace lookalike
