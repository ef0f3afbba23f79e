#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lookalike {

/// Business interaction kinds tracked per customer event.
enum class Channel : uint8_t { Transaction, Visit, Engagement };

std::string_view to_string(Channel channel);
std::optional<Channel> channel_from_string(std::string_view name);

/// A single dated interaction with one product category.
struct Event {
  int32_t day = 0; // epoch day
  Channel channel = Channel::Transaction;
  uint32_t category = 0;
  double magnitude = 1.0; // > 0
};

struct CustomerRecord {
  uint64_t customer_id = 0;
  std::vector<Event> events;
  std::map<std::string, std::string> demographics;
  std::map<std::string, double> dense_stats;
  std::string location_text;
};

/// Half-open day interval [start_day, end_day).
struct TimeWindow {
  int32_t start_day = 0;
  int32_t end_day = 0;

  bool contains(int32_t day) const { return day >= start_day && day < end_day; }
  int32_t length() const { return end_day - start_day; }
  bool operator==(const TimeWindow&) const = default;
};

/// Per-category activity mass for one channel over one window.
using CategoryActivityVector = std::vector<double>;

struct SynthConfig {
  uint64_t n_customers = 1000;
  uint32_t n_categories = 20;
  uint32_t n_archetypes = 8;
  TimeWindow day_range{0, 360};
  bool location_informative = true;
  uint64_t rng_seed = 1;
  /// Expected number of events per customer across all channels.
  double mean_events = 40.0;
};

/// Parses a JSONL universe file, one CustomerRecord object per line.
/// Throws DataError naming the line number for malformed lines and naming
/// the id for duplicate customer_ids.
std::vector<CustomerRecord> load_customers(const std::filesystem::path& path);

/// Writes the records in order, one JSON object per line. Output is
/// deterministic (sorted object keys, shortest-round-trip numbers), so
/// load_customers(save_customers(x)) == x field for field.
void save_customers(std::span<const CustomerRecord> records,
                    const std::filesystem::path& path);

/// Deterministic seeded universe: customers are drawn from archetypes that
/// fix category-activity propensities, demographic preferences and (when
/// location_informative) a private pool of city tokens, so location text
/// genuinely predicts activity similarity.
std::vector<CustomerRecord> generate_synthetic(const SynthConfig& config);

/// Sum of event magnitudes per category, restricted to one channel and one
/// time window. Length is always n_categories.
CategoryActivityVector activity_vector(const CustomerRecord& record,
                                       Channel channel, TimeWindow window,
                                       uint32_t n_categories);

/// Smallest category count consistent with the records (1 + max index seen).
uint32_t infer_category_count(std::span<const CustomerRecord> records);

/// One side of a temporal split: all records plus the window that event
/// aggregation (pair targets, activity vectors) must be restricted to.
struct DatasetView {
  std::span<const CustomerRecord> records;
  TimeWindow window;
};

/// Validates train.end_day <= eval.start_day and returns (train, eval)
/// views over the full record set. The split is temporal, not by customer.
std::pair<DatasetView, DatasetView> time_split(
    std::span<const CustomerRecord> records, TimeWindow train_window,
    TimeWindow eval_window);

} // namespace lookalike
