#include "mtload/timebase.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

using namespace mtload;

TEST_CASE("epoch and civil conversions agree") {
	CHECK(toHourStamp({1970, 1, 1, 0}) == 0);
	CHECK(toHourStamp({1970, 1, 2, 0}) == 24);
	const CivilTime c = toCivil(0);
	CHECK(c.year == 1970);
	CHECK(c.month == 1);
	CHECK(c.day == 1);
	CHECK(c.hour == 0);

	std::mt19937_64 gen(7);
	std::uniform_int_distribution<HourStamp> dist(-400000, 900000);
	for (int i = 0; i < 2000; ++i) {
		const HourStamp h = dist(gen);
		CHECK(toHourStamp(toCivil(h)) == h);
	}
}

TEST_CASE("weekday is Monday-based") {
	// 1970-01-01 was a Thursday.
	CHECK(weekdayMon0(0) == 3);
	// 2020-01-06 was a Monday.
	CHECK(weekdayMon0(toHourStamp({2020, 1, 6, 12})) == 0);
	CHECK(weekdayMon0(toHourStamp({2020, 1, 5, 0})) == 6);
}

TEST_CASE("leap years and day-of-year") {
	CHECK(daysInYear(2020) == 366);
	CHECK(daysInYear(2021) == 365);
	CHECK(daysInYear(2000) == 366);
	CHECK(daysInYear(1900) == 365);
	CHECK(dayOfYear({2020, 3, 1, 0}) == 61);
	CHECK(dayOfYear({2021, 3, 1, 0}) == 60);
	CHECK(dayOfYear({2021, 12, 31, 0}) == 365);
}

TEST_CASE("timestamp parsing accepts hour precision only") {
	CHECK(parseHourStamp("1970-01-01 01:00") == 1);
	CHECK(parseHourStamp("1970-01-01T01:00:00") == 1);
	CHECK(parseHourStamp("1970-01-02") == 24);
	CHECK(formatHourStamp(25) == "1970-01-02T01:00");
	CHECK(parseHourStamp(formatHourStamp(123456)) == 123456);
	CHECK_THROWS(parseHourStamp("1970-01-01 00:30"));
	CHECK_THROWS(parseHourStamp("not a date"));
	CHECK_THROWS(parseHourStamp("1970-13-01 00:00"));
}

TEST_CASE("winter period spans December 18 through January 6") {
	CHECK_FALSE(HolidayCalendar::isWinterPeriod(12, 17));
	CHECK(HolidayCalendar::isWinterPeriod(12, 18));
	CHECK(HolidayCalendar::isWinterPeriod(12, 31));
	CHECK(HolidayCalendar::isWinterPeriod(1, 1));
	CHECK(HolidayCalendar::isWinterPeriod(1, 6));
	CHECK_FALSE(HolidayCalendar::isWinterPeriod(1, 7));
	CHECK_FALSE(HolidayCalendar::isWinterPeriod(7, 1));
}

TEST_CASE("holiday calendar separates countries and deduplicates") {
	HolidayCalendar cal;
	cal.add("FR", 2020, 7, 14, "fete nationale");
	cal.add("FR", 2020, 7, 14, "fete nationale");
	cal.add("DE", 2020, 10, 3, "einheit");
	CHECK(cal.size() == 2);
	const HourStamp fr = toHourStamp({2020, 7, 14, 9});
	CHECK(cal.isHoliday("FR", fr));
	CHECK_FALSE(cal.isHoliday("DE", fr));
	CHECK(cal.isHoliday("DE", toHourStamp({2020, 10, 3, 0})));
}

TEST_CASE("calendar features line up with the grid") {
	HolidayCalendar cal;
	cal.add("FR", 2020, 1, 1, "new year");
	const TimeGrid grid = buildHourlyGrid(toHourStamp({2020, 1, 1, 0}), 72);
	const CalendarFeatures f = calendarFeatures(grid, cal, "FR");
	CHECK(f.hourOfDay.size() == 72);
	CHECK(f.hourOfDay[0] == 0);
	CHECK(f.hourOfDay[25] == 1);
	CHECK(f.yearPosition[0] == doctest::Approx(0.0));
	CHECK(f.yearPosition[12] == doctest::Approx(0.5 / 366.0));
	CHECK(f.dayOfWeek[0] == 2);  // 2020-01-01 was a Wednesday
	CHECK(f.isHoliday[5] == 1);
	CHECK(f.isHoliday[30] == 0);
	CHECK(f.isWinterPeriod[0] == 1);   // January 1st
	CHECK(f.isWinterPeriod[71] == 1);  // January 3rd
}

TEST_CASE("holiday files load from csv") {
	const std::string path = "test_holidays_tmp.csv";
	{
		std::ofstream out(path);
		out << "country,date,label\n";
		out << "FR,2020-07-14,fete nationale\n";
		out << "DE,2020-10-03,einheit\n";
	}
	const HolidayCalendar cal = loadHolidayCalendar(path);
	CHECK(cal.size() == 2);
	CHECK(cal.isHoliday("FR", toHourStamp({2020, 7, 14, 0})));
	std::remove(path.c_str());
}
