M = 7
M = M+2
for i in range(0,2):
  M = M+i
  for j in range(0,3):
    M = M+1
M = M+1
