/*@ requires n > 0;
    requires \valid_read(a + (0 .. n-1));
    assigns \nothing;
    ensures \forall integer k; 0 <= k < n ==> \result >= a[k];
    ensures \exists integer k; 0 <= k < n && \result == a[k];
*/
int arraymax(int *a, int n) {
  int max = a[0];
  int i = 1;
  /*@ loop invariant 0 <= i <= n;
      loop invariant 1 <= i;
      loop invariant \forall integer k; 0 <= k < i ==> max >= a[k];
      loop invariant \exists integer k; 0 <= k < i && max == a[k];
      loop assigns i, max;
      loop variant n - i;
  */
  while (i < n) {
    if (a[i] > max) max = a[i];
    i++;
  }
  return max;
}
