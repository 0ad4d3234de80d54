function add(a, b) {
  return a + b;
}

function sum(list) {
  var total = 0;
  for (var i = 0; i < list.length; i++) {
    total = add(total, list[i]);
  }
  return total;
}

function mean(list) {
  if (list.length === 0) {
    return 0;
  }
  return sum(list) / list.length;
}
