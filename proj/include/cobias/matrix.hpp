#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cobias {

// Dense row-major matrix of doubles. The only numeric container in the
// library; vectors are 1xN or Nx1 matrices.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;
    bool all_finite() const;

    void fill(double v);

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

// Shape-checked building blocks used by the autodiff ops. All throw
// std::invalid_argument naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
// adds a 1 x cols row vector to every row of a
Matrix add_row_vector(const Matrix& a, const Matrix& row);
Matrix col_sums(const Matrix& a);  // 1 x cols
Matrix row_sums(const Matrix& a);  // rows x 1
double total_sum(const Matrix& a);

// rows of `a` selected by index (with repetition allowed)
Matrix take_rows(const Matrix& a, const std::vector<std::size_t>& idx);
Matrix hstack(const Matrix& a, const Matrix& b);
Matrix vstack(const Matrix& a, const Matrix& b);

void ensure_finite(const Matrix& m, const std::string& what);

}  // namespace cobias
