#pragma once

#include <optional>
#include <string>

#include "bankdist/date.hpp"

namespace bankdist {

enum class EventType {
  Run,
  Suspension,
  PartialSuspension,
  Failure,
  Reopening,
  Receivership,
  Other,
};

std::string to_string(EventType t);
std::optional<EventType> event_type_from_string(const std::string& s);

// One (bank, event, date) assertion extracted from a single article.
struct ArticleEvent {
  std::string article_id;
  std::string bank_name_raw;
  std::string state_raw;
  std::string city_raw;
  EventType event_type = EventType::Other;
  Date event_date;
  DatePrecision date_precision = DatePrecision::Day;
  std::optional<double> confidence;

  // Filled by entity resolution; empty until then.
  std::string bank_id;
  int state_fips = 0;
  std::string canonical_city;
};

}  // namespace bankdist
