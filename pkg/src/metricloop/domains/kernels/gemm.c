/* gemm style C = alpha*A*B + beta*C with i-k-j loop order. */
#include <stdio.h>
#include <time.h>

#ifndef N
#define N 400
#endif

static double A[N][N];
static double B[N][N];
static double C[N][N];

static void init(void)
{
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++) {
            A[i][j] = (double)((i * j + 1) % N) / N;
            B[i][j] = (double)((i * (j + 1) + 2) % N) / N;
            C[i][j] = (double)((i * (j + 2) + 3) % N) / N;
        }
}

static void kernel(double alpha, double beta)
{
    for (int i = 0; i < N; i++) {
        for (int j = 0; j < N; j++) { /* @loop L1 */
            /* @load L1 &C[i][j + $D] */
            C[i][j] *= beta;
        }
        for (int k = 0; k < N; k++) {
            for (int j = 0; j < N; j++) { /* @loop L0 */
                /* @load L0 &B[k][j + $D] */
                C[i][j] += alpha * A[i][k] * B[k][j];
            }
        }
    }
}

int main(void)
{
    struct timespec t0, t1;
    init();
    clock_gettime(CLOCK_MONOTONIC, &t0);
    kernel(1.5, 1.2);
    clock_gettime(CLOCK_MONOTONIC, &t1);
    double sum = 0.0;
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            sum += C[i][j];
    printf("checksum=%.17g\n", sum);
    printf("time=%.9f\n", (t1.tv_sec - t0.tv_sec) + 1e-9 * (t1.tv_nsec - t0.tv_nsec));
    return 0;
}
