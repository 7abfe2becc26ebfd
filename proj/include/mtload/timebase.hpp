#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mtload {

// Hours since the Unix epoch on a fixed-offset clock (local standard time,
// no DST transitions). All series in the engine live on this grid.
using HourStamp = std::int64_t;

struct CivilTime {
	int year;
	int month;   // 1..12
	int day;     // 1..31
	int hour;    // 0..23
};

HourStamp toHourStamp(const CivilTime& c);
CivilTime toCivil(HourStamp h);

// Parses "YYYY-MM-DD HH:MM[:SS]" or "YYYY-MM-DDTHH:MM[:SS]" or "YYYY-MM-DD".
// Throws std::invalid_argument when the text is malformed or the stamp is not
// hour-aligned (nonzero minutes/seconds).
HourStamp parseHourStamp(const std::string& text);
std::string formatHourStamp(HourStamp h);

int daysInYear(int year);
int dayOfYear(const CivilTime& c);       // 1-based
int weekdayMon0(HourStamp h);            // 0 = Monday ... 6 = Sunday

// Consecutive hourly timestamps, no gaps, no duplicates.
struct TimeGrid {
	HourStamp start = 0;
	std::int64_t length = 0;

	HourStamp at(std::int64_t i) const { return start + i; }
	HourStamp end() const { return start + length; }   // one past the last stamp
	// Index of a stamp on the grid, or -1 when outside.
	std::int64_t index(HourStamp h) const {
		const std::int64_t i = h - start;
		return (i >= 0 && i < length) ? i : -1;
	}
	int weekdayOfFirst() const { return weekdayMon0(start); }
};

TimeGrid buildHourlyGrid(HourStamp start, std::int64_t hours);

// Explicit holidays per country plus the fixed annual winter period
// (December 18th through January 6th).
class HolidayCalendar {
public:
	void add(const std::string& country, int year, int month, int day, const std::string& label);

	bool isHoliday(const std::string& country, HourStamp h) const;
	static bool isWinterPeriod(HourStamp h);
	static bool isWinterPeriod(int month, int day);

	std::size_t size() const { return entries_.size(); }

	struct Entry {
		std::string country;
		std::int64_t dayIndex;  // days since epoch
		std::string label;
	};
	const std::vector<Entry>& entries() const { return entries_; }

private:
	std::vector<Entry> entries_;
	std::map<std::string, std::set<std::int64_t>> byCountry_;
};

// Reads `country,date,label` rows (CSV with header, or a JSON array of
// objects with those keys). Duplicate (country, date, label) rows collapse
// to one entry.
HolidayCalendar loadHolidayCalendar(const std::string& path);

// Deterministic per-timestamp covariates feeding every GAM.
struct CalendarFeatures {
	std::vector<int> hourOfDay;       // 0..23
	std::vector<int> dayOfWeek;       // 0 = Monday
	std::vector<double> yearPosition; // [0,1), leap-aware
	std::vector<char> isHoliday;
	std::vector<char> isWinterPeriod;
};

// Country selects which holiday entries apply; an empty country means the
// union over all countries in the calendar.
CalendarFeatures calendarFeatures(const TimeGrid& grid, const HolidayCalendar& cal,
                                  const std::string& country = "");

}  // namespace mtload
