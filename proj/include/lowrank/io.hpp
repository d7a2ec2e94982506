#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "lowrank/linalg.hpp"
#include "lowrank/quadcert.hpp"
#include "lowrank/rankmin.hpp"

namespace lowrank {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
// Parses a full token as a double; throws ParseError(line) otherwise.
double parse_double(std::string_view token, int line = 0);

// Plain matrix file: "rows cols" followed by rows*cols entries in row-major
// order. '#' starts a comment that runs to the end of the line.
Matrix read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const Matrix& x);

// System file: n, m, then m symmetric matrices each given as its row-major
// upper triangle.
QuadSystem read_system(std::istream& in);
void write_system(std::ostream& out, const QuadSystem& q);

enum class ProblemKind { matrix, affine, quadratic };

const char* to_string(ProblemKind k);

// Sectioned problem file; docs/file_formats.md has the grammar. Exactly one
// of matrix / affine / system is meaningful, selected by kind.
struct ProblemFile {
  ProblemKind kind = ProblemKind::matrix;
  Matrix matrix;
  AffineSetSpec affine;
  QuadSystem system;
  std::map<std::string, double> options;
};

// Throws ParseError with the offending line number.
ProblemFile read_problem(std::istream& in);
void write_problem(std::ostream& out, const ProblemFile& f);

// True when the stream's first meaningful line is the problem-file header.
bool is_problem_file(std::istream& in);

std::string read_file(const std::string& path);

}  // namespace lowrank
