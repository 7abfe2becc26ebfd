#include "mtload/timebase.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtload {

namespace {

bool isLeap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

const int kCumDays[13] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334, 365};

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
std::int64_t civilToDays(int y, int m, int d) {
	y -= m <= 2;
	const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
	const unsigned yoe = static_cast<unsigned>(y - era * 400);
	const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
	const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
	return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void daysToCivil(std::int64_t z, int& y, int& m, int& d) {
	z += 719468;
	const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
	const unsigned doe = static_cast<unsigned>(z - era * 146097);
	const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
	const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
	const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
	const unsigned mp = (5 * doy + 2) / 153;
	d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
	m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
	y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

HourStamp toHourStamp(const CivilTime& c) {
	return civilToDays(c.year, c.month, c.day) * 24 + c.hour;
}

CivilTime toCivil(HourStamp h) {
	std::int64_t days = h / 24;
	int hour = static_cast<int>(h % 24);
	if (hour < 0) {
		hour += 24;
		days -= 1;
	}
	CivilTime c;
	c.hour = hour;
	daysToCivil(days, c.year, c.month, c.day);
	return c;
}

HourStamp parseHourStamp(const std::string& text) {
	int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
	char sep = 0;
	int fields = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
	if (fields < 3) {
		throw std::invalid_argument("unparseable timestamp: '" + text + "'");
	}
	if (fields >= 4 && sep != ' ' && sep != 'T') {
		throw std::invalid_argument("unparseable timestamp: '" + text + "'");
	}
	if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23) {
		throw std::invalid_argument("timestamp out of range: '" + text + "'");
	}
	if (mi != 0 || s != 0) {
		throw std::invalid_argument("timestamp not hour-aligned: '" + text + "'");
	}
	return civilToDays(y, mo, d) * 24 + h;
}

std::string formatHourStamp(HourStamp h) {
	const CivilTime c = toCivil(h);
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00", c.year, c.month, c.day, c.hour);
	return buf;
}

int daysInYear(int year) { return isLeap(year) ? 366 : 365; }

int dayOfYear(const CivilTime& c) {
	int doy = kCumDays[c.month - 1] + c.day;
	if (c.month > 2 && isLeap(c.year)) ++doy;
	return doy;
}

int weekdayMon0(HourStamp h) {
	std::int64_t days = h / 24;
	if (h % 24 < 0) days -= 1;
	// 1970-01-01 was a Thursday (= 3 with Monday = 0).
	return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

TimeGrid buildHourlyGrid(HourStamp start, std::int64_t hours) {
	if (hours < 1) {
		throw std::invalid_argument("buildHourlyGrid: need at least one hour, got " + std::to_string(hours));
	}
	return TimeGrid{start, hours};
}

void HolidayCalendar::add(const std::string& country, int year, int month, int day,
                          const std::string& label) {
	const std::int64_t di = civilToDays(year, month, day);
	for (const Entry& e : entries_) {
		if (e.country == country && e.dayIndex == di && e.label == label) return;
	}
	entries_.push_back(Entry{country, di, label});
	byCountry_[country].insert(di);
}

bool HolidayCalendar::isHoliday(const std::string& country, HourStamp h) const {
	std::int64_t days = h / 24;
	if (h % 24 < 0) days -= 1;
	if (country.empty()) {
		for (const auto& [_, set] : byCountry_) {
			if (set.count(days)) return true;
		}
		return false;
	}
	auto it = byCountry_.find(country);
	return it != byCountry_.end() && it->second.count(days) > 0;
}

bool HolidayCalendar::isWinterPeriod(int month, int day) {
	return (month == 12 && day >= 18) || (month == 1 && day <= 6);
}

bool HolidayCalendar::isWinterPeriod(HourStamp h) {
	const CivilTime c = toCivil(h);
	return isWinterPeriod(c.month, c.day);
}

namespace {

std::vector<std::string> splitCsvLine(const std::string& line) {
	std::vector<std::string> out;
	std::string cur;
	for (char ch : line) {
		if (ch == ',') {
			out.push_back(cur);
			cur.clear();
		} else if (ch != '\r') {
			cur += ch;
		}
	}
	out.push_back(cur);
	return out;
}

std::string trim(const std::string& s) {
	std::size_t a = s.find_first_not_of(" \t");
	std::size_t b = s.find_last_not_of(" \t");
	return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

void addIsoDate(HolidayCalendar& cal, const std::string& country, const std::string& date,
                const std::string& label, const std::string& where) {
	int y = 0, m = 0, d = 0;
	if (std::sscanf(date.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31) {
		throw std::invalid_argument("holiday file: unparseable date '" + date + "' at " + where);
	}
	cal.add(country, y, m, d, label);
}

}  // namespace

HolidayCalendar loadHolidayCalendar(const std::string& path) {
	std::ifstream in(path);
	if (!in) {
		throw std::runtime_error("cannot open holiday file: " + path);
	}
	HolidayCalendar cal;
	// JSON array variant.
	if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
		nlohmann::json j;
		in >> j;
		std::size_t row = 0;
		for (const auto& e : j) {
			addIsoDate(cal, e.at("country").get<std::string>(), e.at("date").get<std::string>(),
			           e.at("label").get<std::string>(), "entry " + std::to_string(row));
			++row;
		}
		return cal;
	}
	std::string line;
	std::size_t lineNo = 0;
	bool first = true;
	while (std::getline(in, line)) {
		++lineNo;
		if (trim(line).empty()) continue;
		auto cells = splitCsvLine(line);
		if (cells.size() < 3) {
			throw std::invalid_argument("holiday file: expected country,date,label at line " +
			                            std::to_string(lineNo));
		}
		if (first) {
			first = false;
			// Skip a header row when the date column is not a date.
			int y, m, d;
			if (std::sscanf(trim(cells[1]).c_str(), "%d-%d-%d", &y, &m, &d) != 3) continue;
		}
		addIsoDate(cal, trim(cells[0]), trim(cells[1]), trim(cells[2]), "line " + std::to_string(lineNo));
	}
	return cal;
}

CalendarFeatures calendarFeatures(const TimeGrid& grid, const HolidayCalendar& cal,
                                  const std::string& country) {
	CalendarFeatures f;
	const std::size_t n = static_cast<std::size_t>(grid.length);
	f.hourOfDay.resize(n);
	f.dayOfWeek.resize(n);
	f.yearPosition.resize(n);
	f.isHoliday.resize(n);
	f.isWinterPeriod.resize(n);
	for (std::size_t i = 0; i < n; ++i) {
		const HourStamp h = grid.at(static_cast<std::int64_t>(i));
		const CivilTime c = toCivil(h);
		f.hourOfDay[i] = c.hour;
		f.dayOfWeek[i] = weekdayMon0(h);
		f.yearPosition[i] = (dayOfYear(c) - 1 + c.hour / 24.0) / daysInYear(c.year);
		f.isHoliday[i] = cal.isHoliday(country, h) ? 1 : 0;
		f.isWinterPeriod[i] = HolidayCalendar::isWinterPeriod(c.month, c.day) ? 1 : 0;
	}
	return f;
}

}  // namespace mtload
