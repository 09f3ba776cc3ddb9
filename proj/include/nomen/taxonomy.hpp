#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "nomen/errors.hpp"

namespace nomen {

/// Ordered set of origin classes. The class order fixes label indices, the
/// probability-vector layout and every report's row order.
class OriginTaxonomy {
 public:
  OriginTaxonomy(std::vector<std::string> classes,
                 std::vector<std::string> non_western = {},
                 std::map<std::string, std::vector<std::string>> countries = {})
      : classes_(std::move(classes)), countries_(std::move(countries)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (!index_.emplace(classes_[i], static_cast<int>(i)).second) {
        throw InvalidConfig("duplicate origin class: " + classes_[i]);
      }
    }
    for (const std::string& name : non_western) {
      const int idx = index_of(name);
      if (idx < 0) {
        throw InvalidConfig("non-western origin not in taxonomy: " + name);
      }
      non_western_.insert(idx);
    }
  }

  std::size_t size() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& name(std::size_t index) const { return classes_[index]; }

  /// Class index, or -1 when the name is unknown.
  int index_of(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  bool is_non_western(std::size_t index) const {
    return non_western_.count(static_cast<int>(index)) > 0;
  }

  std::vector<std::string> non_western_classes() const {
    std::vector<std::string> out;
    for (int idx : non_western_) out.push_back(classes_[idx]);
    return out;
  }

  const std::map<std::string, std::vector<std::string>>& countries() const {
    return countries_;
  }

  /// The 17 origin classes used throughout, with their national-team lists
  /// and the non-western subset.
  static const OriginTaxonomy& defaults() {
    static const OriginTaxonomy taxonomy = make_defaults();
    return taxonomy;
  }

 private:
  static OriginTaxonomy make_defaults() {
    std::vector<std::string> classes = {
        "Anglo-Saxon", "Arabic",           "Balkans",  "Chinese",
        "East-Europe", "French",           "German",   "Hispanic-Iberian",
        "India",       "Italian",          "Japanese", "Korean",
        "Persian",     "Scandinavian",     "Slavic-Russian",
        "South-East Asia", "Turkish"};
    std::vector<std::string> non_western = {
        "Arabic",  "Chinese", "India",           "Persian",
        "Slavic-Russian", "Turkish", "South-East Asia"};
    std::map<std::string, std::vector<std::string>> countries = {
        {"Anglo-Saxon", {"Great Britain", "Ireland"}},
        {"Arabic",
         {"Egypt", "Syria", "Saudi Arabia", "Jordan", "UAE", "Tunisia",
          "Algeria", "Morocco"}},
        {"Balkans", {"Serbia", "Croatia", "Yugoslavia"}},
        {"Chinese", {"China"}},
        {"East-Europe", {"Poland", "Czechoslovakia", "Hungary"}},
        {"French", {"France"}},
        {"German", {"Germany"}},
        {"Hispanic-Iberian", {"Spain", "Portugal", "Mexico"}},
        {"India", {"India"}},
        {"Italian", {"Italy"}},
        {"Japanese", {"Japan"}},
        {"Korean", {"Korea"}},
        {"Persian", {"Iran"}},
        {"Scandinavian", {"Sweden", "Norway", "Finland", "Denmark", "Iceland"}},
        {"Slavic-Russian", {"Russia", "Ukraine", "Belarus"}},
        {"South-East Asia",
         {"Vietnam", "Thailand", "Malaysia", "Indonesia", "Laos", "Cambodia"}},
        {"Turkish", {"Turkey"}},
    };
    return OriginTaxonomy(std::move(classes), std::move(non_western),
                          std::move(countries));
  }

  std::vector<std::string> classes_;
  std::map<std::string, int> index_;
  std::set<int> non_western_;
  std::map<std::string, std::vector<std::string>> countries_;
};

}  // namespace nomen
